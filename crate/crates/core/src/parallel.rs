//! Parallel Gibbs sampling.
//!
//! Two schemes are provided:
//!
//! * AD-LDA: documents are split into `P` contiguous chunks. Every worker
//!   samples its chunk against a private copy of `nw`/`nwsum`, and after each
//!   sweep the copies are merged with
//!   `nw[w][k] += sum_p (nw_p[w][k] - nw[w][k])`, then `nwsum[k] = sum_w nw[w][k]`.
//! * Blocked: the document x vocabulary grid is cut into `P x P` blocks of
//!   similar token mass. A sweep runs `P` diagonal groups one after another;
//!   blocks inside a group share no document row and no term column, so they
//!   run concurrently with only `nwsum` copied per worker. After each group
//!   `nwsum[k] += sum_p (nwsum_p[k] - nwsum[k])`.
//!
//! Worker random streams are derived from the seed, the sweep index and the
//! worker or block coordinates, so results do not depend on thread timing.

use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use rayon::prelude::*;

use crate::corpus::Corpus;
use crate::error::{LdaError, Result};
use crate::gibbs::{self, Count, GibbsHyper, GibbsState};
use crate::rng;

/// Epoch tag for the partition search streams.
const PARTITION_EPOCH: u64 = u64::MAX - 1;

/// Sparse change of one worker's `nw`/`nwsum` copy relative to the shared base.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct WorkerDelta {
    pub nw_delta: BTreeMap<usize, Vec<i64>>,
    pub nwsum_delta: Vec<i64>,
}

impl WorkerDelta {
    /// Diffs a worker copy against `base`. Both tables are `V x K` row-major.
    pub fn diff(base_nw: &[Count], local_nw: &[Count], num_topics: usize) -> Self {
        let k = num_topics;
        let mut nw_delta = BTreeMap::new();
        let mut nwsum_delta = vec![0i64; k];
        for (w, (b, l)) in base_nw.chunks(k).zip(local_nw.chunks(k)).enumerate() {
            if b == l {
                continue;
            }
            let row: Vec<i64> = b.iter().zip(l).map(|(&b, &l)| l as i64 - b as i64).collect();
            for (s, d) in nwsum_delta.iter_mut().zip(&row) {
                *s += d;
            }
            nw_delta.insert(w, row);
        }
        WorkerDelta { nw_delta, nwsum_delta }
    }
}

/// Adds every delta to `nw` and recomputes `nwsum` from the merged table.
pub fn merge_deltas(nw: &mut [Count], nwsum: &mut [Count], num_topics: usize, deltas: &[WorkerDelta]) -> Result<()> {
    let k = num_topics;
    let mut acc: BTreeMap<usize, Vec<i64>> = BTreeMap::new();
    for d in deltas {
        for (&w, row) in &d.nw_delta {
            let a = acc.entry(w).or_insert_with(|| vec![0; k]);
            for (x, y) in a.iter_mut().zip(row) {
                *x += y;
            }
        }
    }
    for (w, row) in acc {
        for (t, d) in row.into_iter().enumerate() {
            let cell = &mut nw[w * k + t];
            let v = *cell as i64 + d;
            if v < 0 {
                return Err(LdaError::Inconsistent(format!("merged nw[{w}][{t}] = {v}")));
            }
            *cell = v as Count;
        }
    }
    nwsum.iter_mut().for_each(|s| *s = 0);
    for row in nw.chunks(k) {
        for (s, &c) in nwsum.iter_mut().zip(row) {
            *s += c;
        }
    }
    Ok(())
}

/// Contiguous document ranges for `workers` workers, sizes differing by at most one.
pub fn chunk_bounds(num_docs: usize, workers: usize) -> Vec<usize> {
    (0..=workers).map(|p| p * num_docs / workers).collect()
}

fn check_workers(num_docs: usize, workers: usize) -> Result<()> {
    if workers == 0 {
        return Err(LdaError::invalid("at least one worker is required"));
    }
    if workers > num_docs {
        return Err(LdaError::invalid(format!(
            "{workers} workers for {num_docs} documents"
        )));
    }
    Ok(())
}

/// One AD-LDA sweep with `workers` workers.
pub fn adlda_sweep(state: &mut GibbsState, corpus: &Corpus, workers: usize) -> Result<()> {
    check_workers(corpus.num_docs(), workers)?;
    if state.num_docs() != corpus.num_docs() || state.num_terms != corpus.num_terms {
        return Err(LdaError::Inconsistent("state was built for a different corpus".into()));
    }
    let k = state.num_topics();
    let bounds = chunk_bounds(corpus.num_docs(), workers);
    let hyper = state.hyper;
    let num_terms = state.num_terms;
    let epoch = state.sweeps_done;
    let seed = state.seed;

    let mut jobs = Vec::with_capacity(workers);
    {
        let mut z_rest: &mut [Vec<Count>] = &mut state.z;
        let mut nd_rest: &mut [Count] = &mut state.nd;
        for p in 0..workers {
            let n = bounds[p + 1] - bounds[p];
            let (z, zr) = z_rest.split_at_mut(n);
            let (nd, ndr) = nd_rest.split_at_mut(n * k);
            z_rest = zr;
            nd_rest = ndr;
            jobs.push((p, z, nd));
        }
    }
    let base_nw = &state.nw;
    let base_nwsum = &state.nwsum;
    let ndsum = &state.ndsum;
    let deltas: Vec<WorkerDelta> = jobs
        .into_par_iter()
        .map(|(p, z, nd)| {
            let mut nw = base_nw.clone();
            let mut nwsum = base_nwsum.clone();
            let mut rng = rng::stream(seed, epoch, p as u64, 0);
            let docs = &corpus.docs[bounds[p]..bounds[p + 1]];
            gibbs::sweep_docs(
                docs,
                z,
                nd,
                &ndsum[bounds[p]..bounds[p + 1]],
                &mut nw,
                &mut nwsum,
                &hyper,
                num_terms,
                &mut rng,
            )?;
            Ok(WorkerDelta::diff(base_nw, &nw, k))
        })
        .collect::<Result<_>>()?;
    merge_deltas(&mut state.nw, &mut state.nwsum, k, &deltas)?;
    state.sweeps_done += 1;
    Ok(())
}

/// Random initialization followed by `iters` AD-LDA sweeps.
pub fn adlda_train(corpus: &Corpus, hyper: GibbsHyper, workers: usize, iters: usize, seed: u64) -> Result<GibbsState> {
    check_workers(corpus.num_docs(), workers)?;
    let mut state = gibbs::init_state(corpus, hyper, seed)?;
    for _ in 0..iters {
        adlda_sweep(&mut state, corpus, workers)?;
    }
    Ok(state)
}

/// Group `g` holds blocks `(r, (r + g) mod P)`.
pub fn diagonal_schedule(p: usize) -> Vec<Vec<(usize, usize)>> {
    (0..p).map(|g| (0..p).map(|r| (r, (r + g) % p)).collect()).collect()
}

/// A `P x P` partition of documents and terms.
#[derive(Debug, Clone, PartialEq)]
pub struct BlockPlan {
    pub p: usize,
    /// `P + 1` cut points into `row_perm`.
    pub row_bounds: Vec<usize>,
    /// `P + 1` cut points into `col_perm`.
    pub col_bounds: Vec<usize>,
    /// Document id at each permuted row position.
    pub row_perm: Vec<usize>,
    /// Term id at each permuted column position.
    pub col_perm: Vec<usize>,
    pub groups: Vec<Vec<(usize, usize)>>,
    /// Token mass of each block, `block_mass[r][c]`.
    pub block_mass: Vec<Vec<usize>>,
    /// Largest block mass minus smallest.
    pub balance: usize,
}

impl BlockPlan {
    /// Row part of every document.
    pub fn row_of_doc(&self) -> Vec<usize> {
        part_lookup(&self.row_perm, &self.row_bounds)
    }

    /// Column part of every term.
    pub fn col_of_term(&self) -> Vec<usize> {
        part_lookup(&self.col_perm, &self.col_bounds)
    }
}

fn part_lookup(perm: &[usize], bounds: &[usize]) -> Vec<usize> {
    let mut out = vec![0; perm.len()];
    for part in 0..bounds.len() - 1 {
        for &id in &perm[bounds[part]..bounds[part + 1]] {
            out[id] = part;
        }
    }
    out
}

/// Cuts `masses` (in `perm` order) into `p` contiguous parts whose totals are
/// as close as possible to `total / p`.
fn cut_by_mass(perm: &[usize], masses: &[usize], p: usize) -> Vec<usize> {
    let total: usize = masses.iter().sum();
    let mut prefix = Vec::with_capacity(perm.len() + 1);
    prefix.push(0usize);
    for &id in perm {
        prefix.push(prefix.last().unwrap() + masses[id]);
    }
    let mut bounds = vec![0];
    for i in 1..p {
        let target = (i * total) as f64 / p as f64;
        let lo = *bounds.last().unwrap();
        let mut best = lo;
        for j in lo..=perm.len() {
            if (prefix[j] as f64 - target).abs() < (prefix[best] as f64 - target).abs() {
                best = j;
            }
            if prefix[j] as f64 > target {
                break;
            }
        }
        bounds.push(best);
    }
    bounds.push(perm.len());
    bounds
}

fn block_masses(corpus: &Corpus, row_of: &[usize], col_of: &[usize], p: usize) -> Vec<Vec<usize>> {
    let mut mass = vec![vec![0usize; p]; p];
    for (m, doc) in corpus.docs.iter().enumerate() {
        for (w, c) in doc.pairs() {
            mass[row_of[m]][col_of[w]] += c as usize;
        }
    }
    mass
}

/// Searches `trials` random row and column orders and keeps the plan with the
/// smallest spread between the heaviest and lightest block. Trial `t` uses
/// the same stream for every `trials >= t`, so more trials never do worse.
pub fn partition_blocks(corpus: &Corpus, p: usize, trials: usize, seed: u64) -> Result<BlockPlan> {
    if p == 0 {
        return Err(LdaError::invalid("block grid size must be at least 1"));
    }
    if trials == 0 {
        return Err(LdaError::invalid("at least one partition trial is required"));
    }
    let mut term_mass = vec![0usize; corpus.num_terms];
    for doc in &corpus.docs {
        for (w, c) in doc.pairs() {
            term_mass[w] += c as usize;
        }
    }
    let doc_mass: Vec<usize> = corpus.docs.iter().map(|d| d.total()).collect();

    let mut best: Option<BlockPlan> = None;
    for t in 0..trials {
        let mut rng = rng::stream(seed, PARTITION_EPOCH, t as u64, 0);
        let mut col_perm: Vec<usize> = (0..corpus.num_terms).collect();
        let mut row_perm: Vec<usize> = (0..corpus.num_docs()).collect();
        if p > 1 {
            col_perm.shuffle(&mut rng);
            row_perm.shuffle(&mut rng);
        }
        let col_bounds = cut_by_mass(&col_perm, &term_mass, p);
        let row_bounds = cut_by_mass(&row_perm, &doc_mass, p);
        let mut plan = BlockPlan {
            p,
            row_bounds,
            col_bounds,
            row_perm,
            col_perm,
            groups: diagonal_schedule(p),
            block_mass: Vec::new(),
            balance: 0,
        };
        plan.block_mass = block_masses(corpus, &plan.row_of_doc(), &plan.col_of_term(), p);
        let flat = plan.block_mass.iter().flatten();
        plan.balance = flat.clone().max().unwrap() - flat.min().unwrap();
        if best.as_ref().is_none_or(|b| plan.balance < b.balance) {
            best = Some(plan);
        }
    }
    Ok(best.unwrap())
}

struct RowPart {
    docs: Vec<usize>,
    nd: Vec<Count>,
    ndsum: Vec<Count>,
    z: Vec<Vec<Count>>,
}

struct ColPart {
    nw: Vec<Count>,
}

/// Token position lists for every block, resolved against one corpus.
pub struct BlockedSampler {
    plan: BlockPlan,
    row_docs: Vec<Vec<usize>>,
    col_words: Vec<Vec<usize>>,
    /// `(local doc, position, local word)` per block, indexed `r * P + c`.
    block_tokens: Vec<Vec<(u32, u32, u32)>>,
}

impl BlockedSampler {
    pub fn new(corpus: &Corpus, plan: BlockPlan) -> Result<Self> {
        if plan.row_perm.len() != corpus.num_docs() || plan.col_perm.len() != corpus.num_terms {
            return Err(LdaError::invalid(format!(
                "plan covers {} documents and {} terms, corpus has {} and {}",
                plan.row_perm.len(),
                plan.col_perm.len(),
                corpus.num_docs(),
                corpus.num_terms
            )));
        }
        let p = plan.p;
        let row_of = plan.row_of_doc();
        let col_of = plan.col_of_term();
        let mut row_docs = vec![Vec::new(); p];
        for (m, &r) in row_of.iter().enumerate() {
            row_docs[r].push(m);
        }
        let mut col_words = vec![Vec::new(); p];
        let mut local_word = vec![0u32; corpus.num_terms];
        for (w, &c) in col_of.iter().enumerate() {
            local_word[w] = col_words[c].len() as u32;
            col_words[c].push(w);
        }
        let mut block_tokens = vec![Vec::new(); p * p];
        for (r, docs) in row_docs.iter().enumerate() {
            for (dl, &m) in docs.iter().enumerate() {
                for (pos, w) in corpus.docs[m].tokens().enumerate() {
                    block_tokens[r * p + col_of[w]].push((dl as u32, pos as u32, local_word[w]));
                }
            }
        }
        Ok(BlockedSampler {
            plan,
            row_docs,
            col_words,
            block_tokens,
        })
    }

    pub fn plan(&self) -> &BlockPlan {
        &self.plan
    }

    /// One full sweep: all `P` groups, each followed by the `nwsum` merge.
    pub fn sweep(&self, state: &mut GibbsState) -> Result<()> {
        if state.num_docs() != self.plan.row_perm.len() || state.num_terms != self.plan.col_perm.len() {
            return Err(LdaError::invalid("plan does not match the sampler state"));
        }
        let p = self.plan.p;
        let k = state.num_topics();
        let hyper = state.hyper;
        let num_terms = state.num_terms;
        let epoch = state.sweeps_done;
        let seed = state.seed;

        let mut rows: Vec<RowPart> = self
            .row_docs
            .iter()
            .map(|docs| RowPart {
                docs: docs.clone(),
                nd: docs.iter().flat_map(|&m| state.nd_row(m).iter().copied()).collect(),
                ndsum: docs.iter().map(|&m| state.ndsum[m]).collect(),
                z: docs.iter().map(|&m| std::mem::take(&mut state.z[m])).collect(),
            })
            .collect();
        let mut cols: Vec<Option<ColPart>> = self
            .col_words
            .iter()
            .map(|words| {
                Some(ColPart {
                    nw: words.iter().flat_map(|&w| state.nw_row(w).iter().copied()).collect(),
                })
            })
            .collect();

        let mut result = Ok(());
        for group in &self.plan.groups {
            let mut assigned: Vec<ColPart> = group.iter().map(|&(_, c)| cols[c].take().unwrap()).collect();
            let base = &state.nwsum;
            let outcome: Result<Vec<Vec<Count>>> = rows
                .par_iter_mut()
                .zip(assigned.par_iter_mut())
                .zip(group.par_iter())
                .map(|((row, col), &(r, c))| {
                    let mut nwsum = base.clone();
                    let mut weights = vec![0.0; k];
                    let mut rng = rng::stream(seed, epoch, r as u64, c as u64);
                    for &(dl, pos, wl) in &self.block_tokens[r * p + c] {
                        let (dl, wl) = (dl as usize, wl as usize);
                        gibbs::resample_token(
                            &mut row.z[dl][pos as usize],
                            &mut col.nw[wl * k..(wl + 1) * k],
                            &mut nwsum,
                            &mut row.nd[dl * k..(dl + 1) * k],
                            row.ndsum[dl],
                            &hyper,
                            num_terms,
                            &mut weights,
                            &mut rng,
                        )?;
                    }
                    Ok(nwsum)
                })
                .collect();
            for (col, &(_, c)) in assigned.into_iter().zip(group) {
                cols[c] = Some(col);
            }
            match outcome {
                Ok(locals) => merge_nwsum(&mut state.nwsum, &locals)?,
                Err(e) => {
                    result = Err(e);
                    break;
                }
            }
        }

        for row in rows {
            for (dl, (m, z)) in row.docs.iter().zip(row.z).enumerate() {
                state.z[*m] = z;
                state.nd[m * k..(m + 1) * k].copy_from_slice(&row.nd[dl * k..(dl + 1) * k]);
            }
        }
        for (words, col) in self.col_words.iter().zip(cols) {
            let col = col.unwrap();
            for (wl, &w) in words.iter().enumerate() {
                state.nw[w * k..(w + 1) * k].copy_from_slice(&col.nw[wl * k..(wl + 1) * k]);
            }
        }
        result?;
        state.sweeps_done += 1;
        Ok(())
    }
}

/// `nwsum[k] += sum_p (local_p[k] - nwsum[k])`.
pub fn merge_nwsum(nwsum: &mut [Count], locals: &[Vec<Count>]) -> Result<()> {
    for (t, s) in nwsum.iter_mut().enumerate() {
        let delta: i64 = locals.iter().map(|l| l[t] as i64 - *s as i64).sum();
        let v = *s as i64 + delta;
        if v < 0 {
            return Err(LdaError::Inconsistent(format!("merged nwsum[{t}] = {v}")));
        }
        *s = v as Count;
    }
    Ok(())
}

/// Random initialization followed by `iters` blocked sweeps under `plan`.
pub fn blocked_train(corpus: &Corpus, hyper: GibbsHyper, plan: BlockPlan, iters: usize, seed: u64) -> Result<GibbsState> {
    let sampler = BlockedSampler::new(corpus, plan)?;
    let mut state = gibbs::init_state(corpus, hyper, seed)?;
    for _ in 0..iters {
        sampler.sweep(&mut state)?;
    }
    Ok(state)
}
