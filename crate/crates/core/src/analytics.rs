//! Rankings computed from a trained model: similar documents, tags, topic
//! and word distinctiveness, document quality.
//!
//! Every ranking breaks score ties by the lower id.

use std::cmp::Ordering;
use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;

use crate::corpus::Corpus;
use crate::error::{LdaError, Result};
use crate::gibbs::{estimate_phi, GibbsState};
use crate::matrix::Matrix;

/// Stand-in for an infinite KL divergence when ranking.
pub const KL_CAP: f64 = 1e9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum DistanceMetric {
    /// `sum_i (sqrt p_i - sqrt q_i)^2`.
    #[default]
    HellingerSq,
    /// `sum_i p_i ln(p_i / q_i)`, terms with `p_i = 0` dropped.
    Kl,
    OneMinusCosine,
    OneMinusPearson,
}

impl DistanceMetric {
    pub const ALL: [DistanceMetric; 4] = [
        DistanceMetric::HellingerSq,
        DistanceMetric::Kl,
        DistanceMetric::OneMinusCosine,
        DistanceMetric::OneMinusPearson,
    ];

    pub fn name(self) -> &'static str {
        match self {
            DistanceMetric::HellingerSq => "hellinger_sq",
            DistanceMetric::Kl => "kl",
            DistanceMetric::OneMinusCosine => "one_minus_cosine",
            DistanceMetric::OneMinusPearson => "one_minus_pearson",
        }
    }
}

impl fmt::Display for DistanceMetric {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for DistanceMetric {
    type Err = LdaError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "hellinger_sq" | "hellinger" => Ok(DistanceMetric::HellingerSq),
            "kl" => Ok(DistanceMetric::Kl),
            "one_minus_cosine" | "cosine" => Ok(DistanceMetric::OneMinusCosine),
            "one_minus_pearson" | "pearson" => Ok(DistanceMetric::OneMinusPearson),
            other => Err(LdaError::invalid(format!("unknown metric {other:?}"))),
        }
    }
}

fn check_pair(p: &[f64], q: &[f64]) -> Result<()> {
    if p.len() != q.len() {
        return Err(LdaError::invalid(format!("vectors of length {} and {}", p.len(), q.len())));
    }
    if p.iter().chain(q).any(|x| !(*x >= 0.0) || !x.is_finite()) {
        return Err(LdaError::invalid("distribution entries must be finite and non-negative"));
    }
    Ok(())
}

fn cosine_from(dot: f64, pp: f64, qq: f64) -> f64 {
    if pp == 0.0 || qq == 0.0 {
        return 1.0;
    }
    (1.0 - dot / (pp * qq).sqrt()).max(0.0)
}

/// Distance between two non-negative vectors. KL is `+inf` when some
/// `q_i = 0 < p_i`; use [`distance_strict`] to get an error instead.
pub fn distance(p: &[f64], q: &[f64], metric: DistanceMetric) -> Result<f64> {
    check_pair(p, q)?;
    let d = match metric {
        DistanceMetric::HellingerSq => p.iter().zip(q).map(|(a, b)| (a.sqrt() - b.sqrt()).powi(2)).sum(),
        DistanceMetric::Kl => {
            let mut s = 0.0;
            for (&a, &b) in p.iter().zip(q) {
                if a > 0.0 {
                    if b == 0.0 {
                        return Ok(f64::INFINITY);
                    }
                    s += a * (a / b).ln();
                }
            }
            s.max(0.0)
        }
        DistanceMetric::OneMinusCosine => {
            let dot: f64 = p.iter().zip(q).map(|(a, b)| a * b).sum();
            let pp: f64 = p.iter().map(|a| a * a).sum();
            let qq: f64 = q.iter().map(|b| b * b).sum();
            cosine_from(dot, pp, qq)
        }
        DistanceMetric::OneMinusPearson => {
            let n = p.len() as f64;
            let mp = p.iter().sum::<f64>() / n;
            let mq = q.iter().sum::<f64>() / n;
            let mut cov = 0.0;
            let mut vp = 0.0;
            let mut vq = 0.0;
            for (&a, &b) in p.iter().zip(q) {
                cov += (a - mp) * (b - mq);
                vp += (a - mp) * (a - mp);
                vq += (b - mq) * (b - mq);
            }
            if vp == 0.0 || vq == 0.0 {
                1.0
            } else {
                (1.0 - cov / (vp * vq).sqrt()).max(0.0)
            }
        }
    };
    Ok(d)
}

/// Like [`distance`] but an infinite KL divergence is an error.
pub fn distance_strict(p: &[f64], q: &[f64], metric: DistanceMetric) -> Result<f64> {
    let d = distance(p, q, metric)?;
    if d.is_infinite() {
        return Err(LdaError::Numeric("KL divergence is infinite: q has zeros where p does not".into()));
    }
    Ok(d)
}

/// Like [`distance`] with an infinite KL divergence replaced by [`KL_CAP`].
pub fn distance_lenient(p: &[f64], q: &[f64], metric: DistanceMetric) -> Result<f64> {
    distance(p, q, metric).map(|d| if d.is_infinite() { KL_CAP } else { d })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SortOrder {
    Ascending,
    Descending,
}

/// `(id, score)` pairs in ranking order.
#[derive(Debug, Clone, PartialEq)]
pub struct RankedList {
    pub items: Vec<(usize, f64)>,
    pub order: SortOrder,
    /// Scores were min-max normalized to `[0, 1]`.
    pub normalized: bool,
}

impl RankedList {
    pub fn new(mut items: Vec<(usize, f64)>, order: SortOrder, normalized: bool) -> Self {
        items.sort_by(|a, b| {
            let by_score = match order {
                SortOrder::Ascending => a.1.partial_cmp(&b.1),
                SortOrder::Descending => b.1.partial_cmp(&a.1),
            };
            by_score.unwrap_or(Ordering::Equal).then(a.0.cmp(&b.0))
        });
        RankedList { items, order, normalized }
    }

    pub fn ids(&self) -> Vec<usize> {
        self.items.iter().map(|x| x.0).collect()
    }

    pub fn truncate(&mut self, n: usize) {
        self.items.truncate(n);
    }

    /// One `id\tscore` line per item.
    pub fn to_tsv(&self) -> String {
        self.items.iter().map(|(id, s)| format!("{id}\t{s:.6}\n")).collect()
    }
}

/// Maps scores linearly onto `[0, 1]`; all-equal scores map to 0.
pub fn min_max_normalize(scores: &mut [f64]) {
    let lo = scores.iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = scores.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let span = hi - lo;
    for s in scores.iter_mut() {
        *s = if span > 0.0 { (*s - lo) / span } else { 0.0 };
    }
}

/// The `n` documents closest to `d` by `metric` over rows of `theta`,
/// nearest first, excluding `d` itself.
pub fn similar_docs(theta: &Matrix, d: usize, n: usize, metric: DistanceMetric) -> Result<RankedList> {
    if d >= theta.rows() {
        return Err(LdaError::invalid(format!("document {d} out of range ({} documents)", theta.rows())));
    }
    if n == 0 {
        return Err(LdaError::invalid("n must be at least 1"));
    }
    let target = theta.row(d);
    let items = (0..theta.rows())
        .into_par_iter()
        .filter(|&f| f != d)
        .map(|f| distance_lenient(target, theta.row(f), metric).map(|s| (f, s)))
        .collect::<Result<Vec<_>>>()?;
    let mut list = RankedList::new(items, SortOrder::Ascending, false);
    list.truncate(n);
    Ok(list)
}

/// Indices of the `n` largest entries, largest first, ties by lower index.
pub fn top_indices(row: &[f64], n: usize) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..row.len()).collect();
    idx.sort_by(|&a, &b| row[b].partial_cmp(&row[a]).unwrap_or(Ordering::Equal).then(a.cmp(&b)));
    idx.truncate(n);
    idx
}

/// Top `n` words of the most probable topic of `theta_row`, as `(word, phi)`.
/// `n` larger than the vocabulary is clamped.
pub fn auto_tags(theta_row: &[f64], phi: &Matrix, n: usize) -> Result<Vec<(usize, f64)>> {
    if theta_row.len() != phi.rows() {
        return Err(LdaError::invalid("theta row and phi disagree on the number of topics"));
    }
    if theta_row.is_empty() {
        return Err(LdaError::invalid("no topics"));
    }
    let n = if n > phi.cols() {
        log::warn!("asked for {n} tags, vocabulary has {}", phi.cols());
        phi.cols()
    } else {
        n
    };
    let topic = top_indices(theta_row, 1)[0];
    let row = phi.row(topic);
    Ok(top_indices(row, n).into_iter().map(|w| (w, row[w])).collect())
}

/// Weights of the document-side and word-side distances in [`topic_rank`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RankWeights {
    pub doc: f64,
    pub word: f64,
}

impl Default for RankWeights {
    fn default() -> Self {
        RankWeights { doc: 0.5, word: 0.5 }
    }
}

/// Per-topic distance from background noise.
///
/// For topic `k` the document-side vector is
/// `(nd[m][k] + alpha) / (sum_i nd[i][k] + D alpha)` over documents `m`,
/// compared with the uniform `1/D`; the word side compares `phi_k` with the
/// uniform `1/V`. The score is `a * doc + b * word`, highest first.
pub fn topic_rank(state: &GibbsState, weights: RankWeights, metric: DistanceMetric) -> Result<RankedList> {
    if !(weights.doc >= 0.0 && weights.word >= 0.0 && weights.doc + weights.word > 0.0) {
        return Err(LdaError::invalid("rank weights must be non-negative and not both zero"));
    }
    let k = state.num_topics();
    let d = state.num_docs();
    if d == 0 {
        return Err(LdaError::EmptyCorpus);
    }
    let alpha = state.hyper.alpha;
    let phi = estimate_phi(state);
    let uniform_docs = vec![1.0 / d as f64; d];
    let uniform_words = vec![1.0 / state.num_terms as f64; state.num_terms];
    let items = (0..k)
        .into_par_iter()
        .map(|t| {
            let total: f64 = (0..d).map(|m| state.nd[m * k + t] as f64).sum();
            let denom = total + d as f64 * alpha;
            let doc_vec: Vec<f64> = (0..d).map(|m| (state.nd[m * k + t] as f64 + alpha) / denom).collect();
            let s_doc = distance_lenient(&doc_vec, &uniform_docs, metric)?;
            let s_word = distance_lenient(phi.row(t), &uniform_words, metric)?;
            Ok((t, weights.doc * s_doc + weights.word * s_word))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(RankedList::new(items, SortOrder::Descending, false))
}

/// Per-word distance of `(nw[w][k] + beta) / (sum_t nw[w][t] + K beta)` from
/// the uniform `1/K`, min-max normalized, highest first.
pub fn word_rank(state: &GibbsState, metric: DistanceMetric) -> Result<RankedList> {
    let k = state.num_topics();
    let beta = state.hyper.beta;
    let uniform = vec![1.0 / k as f64; k];
    let mut scores = (0..state.num_terms)
        .into_par_iter()
        .map(|w| {
            let row = state.nw_row(w);
            let denom = row.iter().map(|&c| c as f64).sum::<f64>() + k as f64 * beta;
            let v: Vec<f64> = row.iter().map(|&c| (c as f64 + beta) / denom).collect();
            distance_lenient(&v, &uniform, metric)
        })
        .collect::<Result<Vec<_>>>()?;
    min_max_normalize(&mut scores);
    Ok(RankedList::new(scores.into_iter().enumerate().collect(), SortOrder::Descending, true))
}

/// Corpus topic prior `p(k) = sum_d theta[d][k] / sum_d sum_z theta[d][z]`.
pub fn topic_prior(theta: &Matrix) -> Vec<f64> {
    let mut p = vec![0.0; theta.cols()];
    for row in theta.iter_rows() {
        for (a, &x) in p.iter_mut().zip(row) {
            *a += x;
        }
    }
    let total: f64 = p.iter().sum();
    if total > 0.0 {
        p.iter_mut().for_each(|x| *x /= total);
    }
    p
}

/// Corpus-wide word profile `sum_k p(k) phi[k][w]`.
pub fn mass_vector(theta: &Matrix, phi: &Matrix) -> Vec<f64> {
    let prior = topic_prior(theta);
    let mut mass = vec![0.0; phi.cols()];
    for (k, &pk) in prior.iter().enumerate() {
        for (m, &f) in mass.iter_mut().zip(phi.row(k)) {
            *m += pk * f;
        }
    }
    mass
}

/// Sparse generation vector of document `d`: for each distinct word, the mean
/// of `theta[d][z] * phi[z][w]` over its tokens (with `z` the current
/// assignment), normalized to sum to one.
pub fn generation_vector(state: &GibbsState, theta: &Matrix, phi: &Matrix, corpus: &Corpus, d: usize) -> Vec<(usize, f64)> {
    let doc = &corpus.docs[d];
    let mut out = Vec::with_capacity(doc.len());
    let mut n = 0;
    for (w, c) in doc.pairs() {
        let mut s = 0.0;
        for _ in 0..c {
            let z = state.z[d][n] as usize;
            s += theta.get(d, z) * phi.get(z, w);
            n += 1;
        }
        out.push((w, s / c as f64));
    }
    let total: f64 = out.iter().map(|x| x.1).sum();
    if total > 0.0 {
        out.iter_mut().for_each(|x| x.1 /= total);
    }
    out
}

/// KL, `1 - cosine` and `1 - Pearson` of a sparse `p` against a dense `q`,
/// without materializing `p`.
fn sparse_distances(p: &[(usize, f64)], q: &[f64], q_stats: (f64, f64, f64)) -> [f64; 3] {
    let (q_sum, q_sq, q_mean) = q_stats;
    let n = q.len() as f64;
    let mut kl = 0.0;
    let mut dot = 0.0;
    let mut pp = 0.0;
    let mut p_sum = 0.0;
    for &(w, a) in p {
        if a > 0.0 {
            kl += if q[w] > 0.0 { a * (a / q[w]).ln() } else { KL_CAP };
        }
        dot += a * q[w];
        pp += a * a;
        p_sum += a;
    }
    let kl = kl.clamp(0.0, KL_CAP);
    let cos = cosine_from(dot, pp, q_sq);
    let p_mean = p_sum / n;
    let cov = dot - n * p_mean * q_mean;
    let vp = pp - n * p_mean * p_mean;
    let vq = q_sq - q_sum * q_mean;
    let pearson = if vp <= 1e-300 || vq <= 1e-300 {
        1.0
    } else {
        (1.0 - cov / (vp * vq).sqrt()).max(0.0)
    };
    [kl, cos, pearson]
}

/// Per-document distances of the generation vector from the corpus mass
/// vector as `[kl, 1 - cosine, 1 - pearson]`. Empty documents get zeros.
pub fn doc_quality_components(state: &GibbsState, theta: &Matrix, phi: &Matrix, corpus: &Corpus) -> Result<Vec<[f64; 3]>> {
    if theta.rows() != corpus.num_docs() || state.num_docs() != corpus.num_docs() || phi.cols() != corpus.num_terms {
        return Err(LdaError::invalid("state, model and corpus disagree in shape"));
    }
    let mass = mass_vector(theta, phi);
    let q_sum: f64 = mass.iter().sum();
    let q_sq: f64 = mass.iter().map(|x| x * x).sum();
    let stats = (q_sum, q_sq, q_sum / mass.len() as f64);
    Ok((0..corpus.num_docs())
        .into_par_iter()
        .map(|d| {
            if corpus.docs[d].is_empty() {
                return [0.0; 3];
            }
            let p = generation_vector(state, theta, phi, corpus, d);
            sparse_distances(&p, &mass, stats)
        })
        .collect())
}

/// Document quality: the mean of the three distances from the corpus
/// profile, min-max normalized to `[0, 1]`, highest first.
pub fn doc_quality(state: &GibbsState, theta: &Matrix, phi: &Matrix, corpus: &Corpus) -> Result<RankedList> {
    let parts = doc_quality_components(state, theta, phi, corpus)?;
    let mut scores: Vec<f64> = parts.iter().map(|c| c.iter().sum::<f64>() / 3.0).collect();
    min_max_normalize(&mut scores);
    Ok(RankedList::new(scores.into_iter().enumerate().collect(), SortOrder::Descending, true))
}
