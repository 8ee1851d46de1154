//! Collapsed Gibbs sampling for LDA.
//!
//! The sampler keeps four count tables next to the topic assignment `z`:
//!
//! * `nw[w][k]`: tokens of word `w` assigned topic `k` (stored `V x K`)
//! * `nwsum[k]`: tokens assigned topic `k`
//! * `nd[m][k]`: tokens of document `m` assigned topic `k`
//! * `ndsum[m]`: tokens in document `m`
//!
//! Each token is resampled by removing it from the tables, drawing a topic
//! from the full conditional, and adding it back.

use rand::Rng;

use crate::corpus::{Corpus, Document};
use crate::error::{LdaError, Result};
use crate::matrix::Matrix;
use crate::rng::{self, INIT_EPOCH};

/// Integer type of every count table.
pub type Count = u32;

/// Default number of sampling sweeps when inferring new documents.
pub const DEFAULT_INFER_ITERS: usize = 20;

/// Default word-side smoothing.
pub const DEFAULT_BETA: f64 = 0.1;

/// Bytes used by a `K x V` table of [`Count`].
pub fn count_table_bytes(num_topics: usize, num_terms: usize) -> usize {
    num_topics * num_terms * std::mem::size_of::<Count>()
}

/// [`count_table_bytes`] in MiB.
pub fn count_table_mib(num_topics: usize, num_terms: usize) -> f64 {
    count_table_bytes(num_topics, num_terms) as f64 / (1024.0 * 1024.0)
}

/// Symmetric Dirichlet hyperparameters and topic count.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GibbsHyper {
    pub num_topics: usize,
    pub alpha: f64,
    pub beta: f64,
}

impl GibbsHyper {
    pub fn new(num_topics: usize, alpha: f64, beta: f64) -> Result<Self> {
        if num_topics == 0 {
            return Err(LdaError::invalid("number of topics must be at least 1"));
        }
        if !(alpha > 0.0 && alpha.is_finite()) {
            return Err(LdaError::invalid(format!("alpha must be positive, got {alpha}")));
        }
        if !(beta > 0.0 && beta.is_finite()) {
            return Err(LdaError::invalid(format!("beta must be positive, got {beta}")));
        }
        Ok(GibbsHyper {
            num_topics,
            alpha,
            beta,
        })
    }

    /// `alpha = 50 / K`, `beta = 0.1`.
    pub fn with_defaults(num_topics: usize) -> Result<Self> {
        Self::new(num_topics, 50.0 / num_topics.max(1) as f64, DEFAULT_BETA)
    }
}

/// Sampler state: assignments plus the four count tables.
#[derive(Debug, Clone, PartialEq)]
pub struct GibbsState {
    pub hyper: GibbsHyper,
    pub num_terms: usize,
    /// Topic of every token, per document, in [`Document::tokens`] order.
    pub z: Vec<Vec<Count>>,
    /// `V x K`, row-major by word.
    pub nw: Vec<Count>,
    pub nwsum: Vec<Count>,
    /// `M x K`, row-major by document.
    pub nd: Vec<Count>,
    pub ndsum: Vec<Count>,
    pub seed: u64,
    /// Number of completed sweeps; selects the random stream of the next one.
    pub sweeps_done: u64,
}

impl GibbsState {
    pub fn num_topics(&self) -> usize {
        self.hyper.num_topics
    }

    pub fn num_docs(&self) -> usize {
        self.ndsum.len()
    }

    pub fn nw_row(&self, w: usize) -> &[Count] {
        let k = self.num_topics();
        &self.nw[w * k..(w + 1) * k]
    }

    pub fn nd_row(&self, m: usize) -> &[Count] {
        let k = self.num_topics();
        &self.nd[m * k..(m + 1) * k]
    }

    /// Rebuilds the count tables from explicit assignments.
    pub fn from_assignments(
        corpus: &Corpus,
        hyper: GibbsHyper,
        z: Vec<Vec<Count>>,
        seed: u64,
        sweeps_done: u64,
    ) -> Result<Self> {
        let k = hyper.num_topics;
        if z.len() != corpus.num_docs() {
            return Err(LdaError::Inconsistent(format!(
                "{} assignment rows for {} documents",
                z.len(),
                corpus.num_docs()
            )));
        }
        let mut state = GibbsState {
            hyper,
            num_terms: corpus.num_terms,
            z: Vec::new(),
            nw: vec![0; corpus.num_terms * k],
            nwsum: vec![0; k],
            nd: vec![0; corpus.num_docs() * k],
            ndsum: vec![0; corpus.num_docs()],
            seed,
            sweeps_done,
        };
        for (m, (doc, zm)) in corpus.docs.iter().zip(&z).enumerate() {
            if zm.len() != doc.total() {
                return Err(LdaError::Inconsistent(format!(
                    "document {m}: {} assignments for {} tokens",
                    zm.len(),
                    doc.total()
                )));
            }
            for (w, &t) in doc.tokens().zip(zm) {
                let t = t as usize;
                if t >= k {
                    return Err(LdaError::Inconsistent(format!("document {m}: topic {t} >= K={k}")));
                }
                if w >= corpus.num_terms {
                    return Err(LdaError::VocabularyMismatch {
                        vocab_size: corpus.num_terms,
                        ids: vec![w],
                    });
                }
                state.nw[w * k + t] += 1;
                state.nwsum[t] += 1;
                state.nd[m * k + t] += 1;
                state.ndsum[m] += 1;
            }
        }
        state.z = z;
        Ok(state)
    }

    /// Checks the table shapes and sums against `corpus` and `z`.
    pub fn check_consistency(&self, corpus: &Corpus) -> Result<()> {
        let fresh = GibbsState::from_assignments(corpus, self.hyper, self.z.clone(), self.seed, self.sweeps_done)?;
        if fresh.nw != self.nw || fresh.nwsum != self.nwsum || fresh.nd != self.nd || fresh.ndsum != self.ndsum {
            return Err(LdaError::Inconsistent("count tables differ from a recount of z".into()));
        }
        Ok(())
    }
}

/// Draws an index from unnormalized `weights` using the cumulative method:
/// returns the smallest `i` whose prefix sum exceeds `u01 * total`.
pub fn cumulative_sample(weights: &[f64], u01: f64) -> Result<usize> {
    if weights.is_empty() {
        return Err(LdaError::DegenerateDistribution("no outcomes".into()));
    }
    if !(0.0..1.0).contains(&u01) {
        return Err(LdaError::invalid(format!("uniform draw {u01} outside [0, 1)")));
    }
    let mut total = 0.0;
    for (i, &w) in weights.iter().enumerate() {
        if !(w >= 0.0) || !w.is_finite() {
            return Err(LdaError::DegenerateDistribution(format!("weight {i} is {w}")));
        }
        total += w;
    }
    if total <= 0.0 {
        return Err(LdaError::DegenerateDistribution("all weights are zero".into()));
    }
    let threshold = u01 * total;
    let mut acc = 0.0;
    let mut last_positive = 0;
    for (i, &w) in weights.iter().enumerate() {
        acc += w;
        if w > 0.0 {
            last_positive = i;
        }
        if acc > threshold {
            return Ok(i);
        }
    }
    // rounding put the threshold at the very top
    Ok(last_positive)
}

/// Full conditional of one token with its own counts already removed:
///
/// `w_k = (nw[w][k] + beta) / (nwsum[k] + V beta) * (nd[m][k] + alpha) / (ndsum[m] + K alpha)`
///
/// All counts passed here exclude the token being resampled.
pub fn topic_weights(
    nw_row: &[Count],
    nwsum: &[Count],
    nd_row: &[Count],
    ndsum: Count,
    hyper: &GibbsHyper,
    num_terms: usize,
    out: &mut [f64],
) {
    let k = hyper.num_topics;
    let vbeta = num_terms as f64 * hyper.beta;
    let doc_denom = ndsum as f64 + k as f64 * hyper.alpha;
    for t in 0..k {
        let word = (nw_row[t] as f64 + hyper.beta) / (nwsum[t] as f64 + vbeta);
        let topic = (nd_row[t] as f64 + hyper.alpha) / doc_denom;
        out[t] = word * topic;
    }
}

/// Weights for a token of word `word` in document `m`, assuming the caller
/// has already decremented that token's counts.
pub fn full_conditional(state: &GibbsState, m: usize, word: usize, out: &mut [f64]) -> Result<()> {
    if state.ndsum[m] == 0 {
        return Err(LdaError::Inconsistent(format!("document {m} has no tokens left to condition on")));
    }
    topic_weights(
        state.nw_row(word),
        &state.nwsum,
        state.nd_row(m),
        state.ndsum[m] - 1,
        &state.hyper,
        state.num_terms,
        out,
    );
    Ok(())
}

fn take(cell: &mut Count, what: &str) -> Result<()> {
    *cell = cell
        .checked_sub(1)
        .ok_or_else(|| LdaError::Inconsistent(format!("{what} would go negative")))?;
    Ok(())
}

/// One token's decrement, draw and increment against row views of the tables.
/// `ndsum` is the document total including the token.
#[allow(clippy::too_many_arguments)]
#[inline]
pub(crate) fn resample_token<R: Rng + ?Sized>(
    topic: &mut Count,
    nw_row: &mut [Count],
    nwsum: &mut [Count],
    nd_row: &mut [Count],
    ndsum: Count,
    hyper: &GibbsHyper,
    num_terms: usize,
    weights: &mut [f64],
    rng: &mut R,
) -> Result<()> {
    let old = *topic as usize;
    take(&mut nw_row[old], "nw")?;
    take(&mut nwsum[old], "nwsum")?;
    take(&mut nd_row[old], "nd")?;
    topic_weights(nw_row, nwsum, nd_row, ndsum - 1, hyper, num_terms, weights);
    let new = cumulative_sample(weights, rng.random::<f64>())?;
    nw_row[new] += 1;
    nwsum[new] += 1;
    nd_row[new] += 1;
    *topic = new as Count;
    Ok(())
}

/// Sweeps a run of documents whose `nd` rows are given in `nd` (same order).
#[allow(clippy::too_many_arguments)]
pub(crate) fn sweep_docs<R: Rng + ?Sized>(
    docs: &[Document],
    z: &mut [Vec<Count>],
    nd: &mut [Count],
    ndsum: &[Count],
    nw: &mut [Count],
    nwsum: &mut [Count],
    hyper: &GibbsHyper,
    num_terms: usize,
    rng: &mut R,
) -> Result<()> {
    let k = hyper.num_topics;
    let mut weights = vec![0.0; k];
    for (i, (doc, zm)) in docs.iter().zip(z.iter_mut()).enumerate() {
        let nd_row = &mut nd[i * k..(i + 1) * k];
        for (w, topic) in doc.tokens().zip(zm.iter_mut()) {
            resample_token(
                topic,
                &mut nw[w * k..(w + 1) * k],
                nwsum,
                nd_row,
                ndsum[i],
                hyper,
                num_terms,
                &mut weights,
                rng,
            )?;
        }
    }
    Ok(())
}

/// Assigns every token a uniformly random topic.
pub fn init_state(corpus: &Corpus, hyper: GibbsHyper, seed: u64) -> Result<GibbsState> {
    let mut rng = rng::stream(seed, INIT_EPOCH, 0, 0);
    let k = hyper.num_topics as Count;
    let z = corpus
        .docs
        .iter()
        .map(|d| (0..d.total()).map(|_| rng.random_range(0..k)).collect())
        .collect();
    GibbsState::from_assignments(corpus, hyper, z, seed, 0)
}

/// Resamples every token once.
pub fn sweep(state: &mut GibbsState, corpus: &Corpus) -> Result<()> {
    if state.num_docs() != corpus.num_docs() || state.num_terms != corpus.num_terms {
        return Err(LdaError::Inconsistent("state was built for a different corpus".into()));
    }
    let mut rng = rng::stream(state.seed, state.sweeps_done, 0, 0);
    let GibbsState {
        hyper,
        num_terms,
        z,
        nw,
        nwsum,
        nd,
        ndsum,
        ..
    } = state;
    sweep_docs(&corpus.docs, z, nd, ndsum, nw, nwsum, hyper, *num_terms, &mut rng)?;
    state.sweeps_done += 1;
    Ok(())
}

/// Initializes and runs `iters` serial sweeps.
pub fn train(corpus: &Corpus, hyper: GibbsHyper, iters: usize, seed: u64) -> Result<GibbsState> {
    let mut state = init_state(corpus, hyper, seed)?;
    for _ in 0..iters {
        sweep(&mut state, corpus)?;
    }
    Ok(state)
}

/// `theta[m][k] = (nd[m][k] + alpha) / (ndsum[m] + K alpha)`.
pub fn estimate_theta(state: &GibbsState) -> Matrix {
    let k = state.num_topics();
    let alpha = state.hyper.alpha;
    let mut theta = Matrix::zeros(state.num_docs(), k);
    for m in 0..state.num_docs() {
        let denom = state.ndsum[m] as f64 + k as f64 * alpha;
        for (t, &c) in state.nd_row(m).iter().enumerate() {
            theta.set(m, t, (c as f64 + alpha) / denom);
        }
    }
    theta
}

/// `phi[k][w] = (nw[w][k] + beta) / (nwsum[k] + V beta)`.
pub fn estimate_phi(state: &GibbsState) -> Matrix {
    let k = state.num_topics();
    let v = state.num_terms;
    let beta = state.hyper.beta;
    let mut phi = Matrix::zeros(k, v);
    for t in 0..k {
        let denom = state.nwsum[t] as f64 + v as f64 * beta;
        for w in 0..v {
            phi.set(t, w, (state.nw[w * k + t] as f64 + beta) / denom);
        }
    }
    phi
}

/// Point estimates of the document-topic and topic-word distributions.
#[derive(Debug, Clone, PartialEq)]
pub struct TopicModel {
    /// `M x K`.
    pub theta: Matrix,
    /// `K x V`.
    pub phi: Matrix,
}

impl TopicModel {
    pub fn from_state(state: &GibbsState) -> Self {
        TopicModel {
            theta: estimate_theta(state),
            phi: estimate_phi(state),
        }
    }
}

/// `exp(-sum_d sum_{w in d} log sum_k theta[d][k] phi[k][w] / sum_d N_d)`.
pub fn perplexity(theta: &Matrix, phi: &Matrix, heldout: &Corpus) -> Result<f64> {
    if theta.rows() != heldout.num_docs() {
        return Err(LdaError::invalid(format!(
            "theta has {} rows for {} documents",
            theta.rows(),
            heldout.num_docs()
        )));
    }
    if theta.cols() != phi.rows() {
        return Err(LdaError::invalid("theta and phi disagree on the number of topics"));
    }
    heldout.check_vocabulary(phi.cols())?;
    let mut log_lik = 0.0;
    let mut tokens = 0usize;
    for (d, doc) in heldout.docs.iter().enumerate() {
        let row = theta.row(d);
        for (w, c) in doc.pairs() {
            let p: f64 = row.iter().enumerate().map(|(k, th)| th * phi.get(k, w)).sum();
            if !(p > 0.0) {
                return Err(LdaError::Numeric(format!("document {d}, term {w}: predictive probability {p}")));
            }
            log_lik += c as f64 * p.ln();
            tokens += c as usize;
        }
    }
    if tokens == 0 {
        return Err(LdaError::invalid("held-out corpus has no tokens"));
    }
    Ok((-log_lik / tokens as f64).exp())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InferOptions {
    pub iters: usize,
    pub seed: u64,
    /// Reject out-of-vocabulary terms instead of skipping them.
    pub strict: bool,
}

impl Default for InferOptions {
    fn default() -> Self {
        InferOptions {
            iters: DEFAULT_INFER_ITERS,
            seed: 0,
            strict: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Inference {
    /// `M_new x K`.
    pub theta: Matrix,
    /// Topic per token of `docs`.
    pub assignments: Vec<Vec<Count>>,
    /// The inferred documents with out-of-vocabulary terms removed.
    pub docs: Corpus,
    pub skipped_tokens: usize,
}

/// Samples topics for unseen documents against a trained state, which acts
/// as a fixed pseudo-count. Only counts local to the new documents change.
pub fn infer_new(trained: &GibbsState, new_docs: &Corpus, opts: InferOptions) -> Result<Inference> {
    let v = trained.num_terms;
    let k = trained.num_topics();
    let hyper = trained.hyper;

    if opts.strict {
        new_docs.check_vocabulary(v)?;
    }
    let mut skipped = 0usize;
    let docs: Vec<Document> = new_docs
        .docs
        .iter()
        .map(|d| {
            let (keep, drop): (Vec<_>, Vec<_>) = d.pairs().partition(|&(t, _)| t < v);
            skipped += drop.iter().map(|&(_, c)| c as usize).sum::<usize>();
            Document {
                terms: keep.iter().map(|p| p.0).collect(),
                counts: keep.iter().map(|p| p.1).collect(),
            }
        })
        .collect();
    if skipped > 0 {
        log::warn!("skipped {skipped} out-of-vocabulary tokens during inference");
    }

    // new_nw only needs rows for words present in the new documents
    let mut local = vec![usize::MAX; v];
    let mut words = Vec::new();
    for d in &docs {
        for &t in &d.terms {
            if local[t] == usize::MAX {
                local[t] = words.len();
                words.push(t);
            }
        }
    }
    let mut new_nw: Vec<Count> = vec![0; words.len() * k];
    let mut new_nwsum: Vec<Count> = vec![0; k];
    let mut nd: Vec<Count> = vec![0; docs.len() * k];
    let ndsum: Vec<Count> = docs.iter().map(|d| d.total() as Count).collect();

    let mut rng = rng::stream(opts.seed, INIT_EPOCH, 0, 0);
    let mut z: Vec<Vec<Count>> = Vec::with_capacity(docs.len());
    for (m, d) in docs.iter().enumerate() {
        let zm: Vec<Count> = d
            .tokens()
            .map(|w| {
                let t = rng.random_range(0..k);
                new_nw[local[w] * k + t] += 1;
                new_nwsum[t] += 1;
                nd[m * k + t] += 1;
                t as Count
            })
            .collect();
        z.push(zm);
    }

    let vbeta = v as f64 * hyper.beta;
    let mut weights = vec![0.0; k];
    for it in 0..opts.iters {
        let mut rng = rng::stream(opts.seed, it as u64, 0, 0);
        for (m, (d, zm)) in docs.iter().zip(z.iter_mut()).enumerate() {
            let doc_denom = ndsum[m].saturating_sub(1) as f64 + k as f64 * hyper.alpha;
            for (w, topic) in d.tokens().zip(zm.iter_mut()) {
                let old = *topic as usize;
                let row = local[w] * k;
                take(&mut new_nw[row + old], "new_nw")?;
                take(&mut new_nwsum[old], "new_nwsum")?;
                take(&mut nd[m * k + old], "nd")?;
                let trn_row = trained.nw_row(w);
                for t in 0..k {
                    let word = (trn_row[t] as f64 + new_nw[row + t] as f64 + hyper.beta)
                        / (trained.nwsum[t] as f64 + new_nwsum[t] as f64 + vbeta);
                    let topic_p = (nd[m * k + t] as f64 + hyper.alpha) / doc_denom;
                    weights[t] = word * topic_p;
                }
                let new = cumulative_sample(&weights, rng.random::<f64>())?;
                new_nw[row + new] += 1;
                new_nwsum[new] += 1;
                nd[m * k + new] += 1;
                *topic = new as Count;
            }
        }
    }

    let mut theta = Matrix::zeros(docs.len(), k);
    for m in 0..docs.len() {
        let denom = ndsum[m] as f64 + k as f64 * hyper.alpha;
        for t in 0..k {
            theta.set(m, t, (nd[m * k + t] as f64 + hyper.alpha) / denom);
        }
    }
    Ok(Inference {
        theta,
        assignments: z,
        docs: Corpus {
            docs,
            num_terms: v,
        },
        skipped_tokens: skipped,
    })
}
