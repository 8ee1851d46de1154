//! Variational EM for LDA with a symmetric Dirichlet prior.
//!
//! The E-step fits a variational Dirichlet `gamma` and per-term topic
//! responsibilities `phi` for every document by coordinate ascent. The
//! M-step turns the accumulated expected counts into `log_beta` and, when
//! requested, re-estimates `alpha` with a Newton iteration in `log alpha`.
//!
//! The update order, convergence tests and the `-100` floor for unseen
//! word/topic pairs follow the widely used C implementation, so models and
//! traces written by either program can be compared directly.

pub mod special;

use rand::Rng;
use rayon::prelude::*;

use crate::corpus::{Corpus, Document};
use crate::error::{LdaError, Result};
use crate::matrix::Matrix;
use crate::rng::{self, INIT_EPOCH};

pub use special::{digamma, lgamma, log_sum, trigamma};

/// `log_beta` value for word/topic pairs with no expected count.
pub const LOG_ZERO: f64 = -100.0;
pub const NEWTON_THRESH: f64 = 1e-5;
pub const MAX_ALPHA_ITER: usize = 1000;
/// Starting point of the `alpha` Newton iteration.
pub const INIT_ALPHA_NEWTON: f64 = 100.0;
/// Documents copied into each topic by seeded initialization.
pub const NUM_INIT: usize = 1;

/// Documents processed per parallel E-step batch.
const E_STEP_BATCH: usize = 4096;
const MAX_ALPHA_RESTARTS: usize = 30;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VemSettings {
    /// `-1` removes the cap.
    pub var_max_iter: i64,
    pub var_convergence: f64,
    pub em_max_iter: usize,
    pub em_convergence: f64,
    pub estimate_alpha: bool,
}

impl Default for VemSettings {
    fn default() -> Self {
        VemSettings {
            var_max_iter: 20,
            var_convergence: 1e-6,
            em_max_iter: 100,
            em_convergence: 1e-4,
            estimate_alpha: true,
        }
    }
}

impl VemSettings {
    /// Reads a settings file of `key value` lines:
    ///
    /// ```text
    /// var max iter 20
    /// var convergence 1e-6
    /// em max iter 100
    /// em convergence 1e-4
    /// alpha estimate
    /// ```
    ///
    /// Missing keys keep their defaults.
    pub fn parse(text: &str) -> Result<Self> {
        let mut s = VemSettings::default();
        for (i, raw) in text.lines().enumerate() {
            let line_no = i + 1;
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let words: Vec<&str> = line.split_whitespace().collect();
            let (key, value) = words.split_at(words.len() - 1);
            let key = key.join(" ");
            let value = value[0];
            let num = |v: &str| -> Result<f64> {
                v.parse::<f64>()
                    .map_err(|_| LdaError::parse(line_no, format!("bad number {v:?}")))
            };
            match key.as_str() {
                "var max iter" => {
                    s.var_max_iter = value
                        .parse()
                        .map_err(|_| LdaError::parse(line_no, format!("bad integer {value:?}")))?
                }
                "var convergence" => s.var_convergence = num(value)?,
                "em max iter" => {
                    s.em_max_iter = value
                        .parse()
                        .map_err(|_| LdaError::parse(line_no, format!("bad integer {value:?}")))?
                }
                "em convergence" => s.em_convergence = num(value)?,
                "alpha" => {
                    s.estimate_alpha = match value {
                        "estimate" => true,
                        "fixed" => false,
                        other => return Err(LdaError::parse(line_no, format!("alpha must be fixed or estimate, got {other:?}"))),
                    }
                }
                _ => return Err(LdaError::parse(line_no, format!("unknown setting {line:?}"))),
            }
        }
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<()> {
        if self.var_max_iter == 0 || self.var_max_iter < -1 {
            return Err(LdaError::invalid("var max iter must be positive or -1"));
        }
        if !(self.var_convergence > 0.0) || !(self.em_convergence > 0.0) {
            return Err(LdaError::invalid("convergence thresholds must be positive"));
        }
        if self.em_max_iter == 0 {
            return Err(LdaError::invalid("em max iter must be at least 1"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct VemModel {
    /// `K x V`, `log p(w | topic)`.
    pub log_beta: Matrix,
    pub alpha: f64,
}

impl VemModel {
    pub fn num_topics(&self) -> usize {
        self.log_beta.rows()
    }

    pub fn num_terms(&self) -> usize {
        self.log_beta.cols()
    }

    pub fn new(log_beta: Matrix, alpha: f64) -> Result<Self> {
        if !(alpha > 0.0) || !alpha.is_finite() {
            return Err(LdaError::invalid(format!("alpha must be positive, got {alpha}")));
        }
        if log_beta.rows() == 0 || log_beta.cols() == 0 {
            return Err(LdaError::invalid("model needs at least one topic and one term"));
        }
        Ok(VemModel { log_beta, alpha })
    }
}

/// Variational parameters of one document.
#[derive(Debug, Clone, PartialEq)]
pub struct DocVariational {
    pub gamma: Vec<f64>,
    /// One row per distinct term of the document, `len x K`.
    pub phi: Matrix,
}

impl DocVariational {
    /// Most responsible topic of each distinct term; ties go to the lower id.
    pub fn assignments(&self) -> Vec<usize> {
        self.phi
            .iter_rows()
            .map(|row| {
                let mut best = 0;
                for (k, &p) in row.iter().enumerate() {
                    if p > row[best] {
                        best = k;
                    }
                }
                best
            })
            .collect()
    }
}

/// Expected counts gathered during an E-step.
#[derive(Debug, Clone, PartialEq)]
pub struct SuffStats {
    pub class_word: Matrix,
    pub class_total: Vec<f64>,
    pub alpha_suffstats: f64,
    pub num_docs: usize,
}

impl SuffStats {
    pub fn zeros(num_topics: usize, num_terms: usize) -> Self {
        SuffStats {
            class_word: Matrix::zeros(num_topics, num_terms),
            class_total: vec![0.0; num_topics],
            alpha_suffstats: 0.0,
            num_docs: 0,
        }
    }

    /// Adds one document's expected counts and `sum_i digamma(gamma_i) - K digamma(sum gamma)`.
    pub fn accumulate(&mut self, doc: &Document, var: &DocVariational) {
        let k = self.class_total.len();
        let gamma_sum: f64 = var.gamma.iter().sum();
        self.alpha_suffstats += var.gamma.iter().map(|&g| digamma(g)).sum::<f64>() - k as f64 * digamma(gamma_sum);
        for (n, (w, c)) in doc.pairs().enumerate() {
            for (t, &p) in var.phi.row(n).iter().enumerate() {
                let x = c as f64 * p;
                let cell = self.class_word.get(t, w);
                self.class_word.set(t, w, cell + x);
                self.class_total[t] += x;
            }
        }
        self.num_docs += 1;
    }
}

/// Seeded start: every topic receives the counts of [`NUM_INIT`] random
/// documents, then every entry is smoothed by one.
pub fn seeded_suffstats<R: Rng + ?Sized>(corpus: &Corpus, num_topics: usize, num_init: usize, rng: &mut R) -> SuffStats {
    let v = corpus.num_terms;
    let mut ss = SuffStats::zeros(num_topics, v);
    for k in 0..num_topics {
        for _ in 0..num_init {
            let d = (rng.random::<f64>() * corpus.num_docs() as f64).floor() as usize;
            log::info!("initialized topic {k} with document {d}");
            for (w, c) in corpus.docs[d].pairs() {
                let cell = ss.class_word.get(k, w);
                ss.class_word.set(k, w, cell + c as f64);
            }
        }
        for w in 0..v {
            let cell = ss.class_word.get(k, w) + 1.0;
            ss.class_word.set(k, w, cell);
            ss.class_total[k] += cell;
        }
    }
    ss
}

/// Random start: `class_word[k][w] = 1/V + U(0, 1)`.
pub fn random_suffstats<R: Rng + ?Sized>(num_topics: usize, num_terms: usize, rng: &mut R) -> SuffStats {
    let mut ss = SuffStats::zeros(num_topics, num_terms);
    for k in 0..num_topics {
        for w in 0..num_terms {
            let x = 1.0 / num_terms as f64 + rng.random::<f64>();
            ss.class_word.set(k, w, x);
            ss.class_total[k] += x;
        }
    }
    ss
}

/// Evidence lower bound of one document for fixed `gamma` and `phi`.
pub fn compute_elbo(doc: &Document, model: &VemModel, gamma: &[f64], phi: &Matrix) -> Result<f64> {
    let k = model.num_topics();
    if gamma.len() != k || phi.rows() != doc.len() || phi.cols() != k {
        return Err(LdaError::invalid("variational parameters do not match document and model"));
    }
    if gamma.iter().any(|g| !(g.is_finite() && *g > 0.0)) {
        return Err(LdaError::Numeric(format!("gamma is not positive and finite: {gamma:?}")));
    }
    let alpha = model.alpha;
    let gamma_sum: f64 = gamma.iter().sum();
    let digsum = digamma(gamma_sum);
    let mut likelihood = lgamma(alpha * k as f64) - k as f64 * lgamma(alpha) - lgamma(gamma_sum);
    for (t, &g) in gamma.iter().enumerate() {
        let dig = digamma(g) - digsum;
        likelihood += (alpha - 1.0) * dig + lgamma(g) - (g - 1.0) * dig;
        for (n, (w, c)) in doc.pairs().enumerate() {
            let p = phi.get(n, t);
            if p > 0.0 {
                likelihood += c as f64 * (p * (dig - p.ln() + model.log_beta.get(t, w)));
            }
        }
    }
    Ok(likelihood)
}

/// Coordinate ascent for one document. Returns the fitted parameters and the
/// bound after every pass, the last entry being the final value.
pub fn e_step_doc_traced(doc: &Document, model: &VemModel, settings: &VemSettings) -> Result<(DocVariational, Vec<f64>)> {
    let k = model.num_topics();
    if let Some(&w) = doc.terms.iter().find(|&&w| w >= model.num_terms()) {
        return Err(LdaError::VocabularyMismatch {
            vocab_size: model.num_terms(),
            ids: vec![w],
        });
    }
    let total = doc.total() as f64;
    let mut gamma = vec![model.alpha + total / k as f64; k];
    let mut dig: Vec<f64> = gamma.iter().map(|&g| digamma(g)).collect();
    let mut phi = Matrix::from_vec(doc.len(), k, vec![1.0 / k as f64; doc.len() * k])?;
    let mut old = vec![0.0; k];
    let mut trace = Vec::new();

    let mut likelihood_old = 0.0;
    let mut converged = 1.0;
    let mut iter: i64 = 0;
    while converged > settings.var_convergence && (iter < settings.var_max_iter || settings.var_max_iter == -1) {
        iter += 1;
        for (n, (w, c)) in doc.pairs().enumerate() {
            let row = phi.row_mut(n);
            let mut phisum = 0.0;
            for t in 0..k {
                old[t] = row[t];
                row[t] = dig[t] + model.log_beta.get(t, w);
                phisum = if t > 0 { log_sum(phisum, row[t]) } else { row[t] };
            }
            for t in 0..k {
                row[t] = (row[t] - phisum).exp();
                gamma[t] += c as f64 * (row[t] - old[t]);
                dig[t] = digamma(gamma[t]);
            }
        }
        let likelihood = compute_elbo(doc, model, &gamma, &phi)?;
        if !likelihood.is_finite() {
            return Err(LdaError::Numeric(format!("bound is {likelihood} at variational iteration {iter}")));
        }
        trace.push(likelihood);
        converged = (likelihood_old - likelihood) / likelihood_old;
        likelihood_old = likelihood;
    }
    if trace.is_empty() {
        trace.push(compute_elbo(doc, model, &gamma, &phi)?);
    }
    Ok((DocVariational { gamma, phi }, trace))
}

/// [`e_step_doc_traced`] keeping only the final bound.
pub fn e_step_doc(doc: &Document, model: &VemModel, settings: &VemSettings) -> Result<(DocVariational, f64)> {
    let (var, trace) = e_step_doc_traced(doc, model, settings)?;
    Ok((var, *trace.last().unwrap()))
}

/// `log_beta = log(class_word) - log(class_total)`, [`LOG_ZERO`] where the
/// expected count is zero; re-estimates `alpha` if asked.
pub fn m_step(ss: &SuffStats, alpha: f64, estimate_alpha: bool) -> Result<VemModel> {
    let k = ss.class_total.len();
    let v = ss.class_word.cols();
    if let Some(t) = ss.class_total.iter().position(|&x| !(x > 0.0)) {
        return Err(LdaError::EmptyTopic(t));
    }
    let mut log_beta = Matrix::zeros(k, v);
    for t in 0..k {
        let log_total = ss.class_total[t].ln();
        for w in 0..v {
            let cw = ss.class_word.get(t, w);
            log_beta.set(t, w, if cw > 0.0 { cw.ln() - log_total } else { LOG_ZERO });
        }
    }
    let alpha = if estimate_alpha {
        let fit = opt_alpha(ss.alpha_suffstats, ss.num_docs, k)?;
        log::info!("new alpha = {:.5}", fit.alpha);
        fit.alpha
    } else {
        alpha
    };
    VemModel::new(log_beta, alpha)
}

/// Terms of the bound that depend on a symmetric `alpha`.
pub fn alhood(a: f64, ss: f64, d: usize, k: usize) -> f64 {
    let (d, k) = (d as f64, k as f64);
    d * (lgamma(k * a) - k * lgamma(a)) + (a - 1.0) * ss
}

pub fn d_alhood(a: f64, ss: f64, d: usize, k: usize) -> f64 {
    let (d, k) = (d as f64, k as f64);
    d * (k * digamma(k * a) - k * digamma(a)) + ss
}

pub fn d2_alhood(a: f64, d: usize, k: usize) -> f64 {
    let (d, k) = (d as f64, k as f64);
    d * (k * k * trigamma(k * a) - k * trigamma(a))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AlphaFit {
    pub alpha: f64,
    pub iterations: usize,
    /// False when the iteration cap was reached first.
    pub converged: bool,
}

/// Newton's method in `log alpha`, started at [`INIT_ALPHA_NEWTON`] and
/// restarted ten times further out whenever the iterate stops being finite.
pub fn opt_alpha(ss: f64, num_docs: usize, num_topics: usize) -> Result<AlphaFit> {
    if num_docs == 0 || num_topics == 0 {
        return Err(LdaError::invalid("alpha estimation needs documents and topics"));
    }
    let mut init_a = INIT_ALPHA_NEWTON;
    let mut log_a = init_a.ln();
    let mut restarts = 0;
    let mut iter = 0;
    loop {
        iter += 1;
        let mut a = log_a.exp();
        if !a.is_finite() || a <= 0.0 {
            restarts += 1;
            if restarts > MAX_ALPHA_RESTARTS {
                return Err(LdaError::Numeric("alpha iteration keeps diverging".into()));
            }
            init_a *= 10.0;
            log::warn!("alpha is {a}; new init = {init_a:.5}");
            a = init_a;
            log_a = a.ln();
        }
        let df = d_alhood(a, ss, num_docs, num_topics);
        let d2f = d2_alhood(a, num_docs, num_topics);
        log_a -= df / (d2f * a + df);
        log::debug!("alpha maximization : {:.5} {:.5}", alhood(a, ss, num_docs, num_topics), df);
        if df.abs() <= NEWTON_THRESH || iter >= MAX_ALPHA_ITER {
            let alpha = log_a.exp();
            if !(alpha.is_finite() && alpha > 0.0) {
                return Err(LdaError::Numeric(format!("alpha iteration ended at {alpha}")));
            }
            return Ok(AlphaFit {
                alpha,
                iterations: iter,
                converged: df.abs() <= NEWTON_THRESH,
            });
        }
    }
}

/// How the first model is built.
#[derive(Debug, Clone, PartialEq)]
pub enum VemInit {
    Seeded,
    Random,
    Model(VemModel),
}

/// Progress reported by [`run_em`].
pub enum EmEvent<'a> {
    /// The starting model, before any E-step.
    Initial { model: &'a VemModel },
    /// After the M-step of EM iteration `iteration` (1-based).
    Iteration {
        iteration: usize,
        likelihood: f64,
        converged: f64,
        model: &'a VemModel,
        gammas: &'a Matrix,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub struct EmResult {
    pub model: VemModel,
    /// Gammas of the last E-step, `M x K`.
    pub gammas: Matrix,
    /// `(likelihood, converged)` per EM iteration.
    pub trace: Vec<(f64, f64)>,
    /// Most responsible topic of every distinct term, from a final E pass.
    pub word_assignments: Vec<Vec<usize>>,
    /// Variational cap in force at the end (doubled whenever the bound dropped).
    pub var_max_iter: i64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EmOptions {
    pub num_topics: usize,
    pub settings: VemSettings,
    pub init: VemInit,
    /// Starting `alpha` for seeded and random starts.
    pub initial_alpha: f64,
    pub num_init: usize,
    pub seed: u64,
}

/// Runs the E-step over `docs`; documents are fitted in parallel and their
/// statistics added in document order.
fn e_step_batch(docs: &[Document], model: &VemModel, settings: &VemSettings, ss: &mut SuffStats, gammas: &mut Matrix) -> Result<f64> {
    let mut likelihood = 0.0;
    for (b, chunk) in docs.chunks(E_STEP_BATCH).enumerate() {
        let fitted: Vec<(DocVariational, f64)> = chunk
            .par_iter()
            .map(|doc| e_step_doc(doc, model, settings))
            .collect::<Result<_>>()?;
        for (i, (doc, (var, l))) in chunk.iter().zip(fitted).enumerate() {
            ss.accumulate(doc, &var);
            gammas.row_mut(b * E_STEP_BATCH + i).copy_from_slice(&var.gamma);
            likelihood += l;
        }
    }
    Ok(likelihood)
}

pub fn run_em(corpus: &Corpus, opts: &EmOptions, mut observer: impl FnMut(EmEvent<'_>) -> Result<()>) -> Result<EmResult> {
    opts.settings.validate()?;
    if corpus.num_docs() == 0 {
        return Err(LdaError::EmptyCorpus);
    }
    let k = opts.num_topics;
    let v = corpus.num_terms;
    let mut model = match &opts.init {
        VemInit::Seeded | VemInit::Random => {
            if k == 0 {
                return Err(LdaError::invalid("number of topics must be at least 1"));
            }
            let mut rng = rng::stream(opts.seed, INIT_EPOCH, 0, 0);
            let ss = match opts.init {
                VemInit::Seeded => seeded_suffstats(corpus, k, opts.num_init, &mut rng),
                _ => random_suffstats(k, v, &mut rng),
            };
            let mut m = m_step(&ss, opts.initial_alpha, false)?;
            m.alpha = opts.initial_alpha;
            VemModel::new(m.log_beta, m.alpha)?
        }
        VemInit::Model(m) => {
            if m.num_topics() != k && k != 0 {
                return Err(LdaError::invalid(format!(
                    "starting model has {} topics, {k} requested",
                    m.num_topics()
                )));
            }
            m.clone()
        }
    };
    corpus.check_vocabulary(model.num_terms())?;
    let k = model.num_topics();
    observer(EmEvent::Initial { model: &model })?;

    let mut settings = opts.settings;
    let mut gammas = Matrix::zeros(corpus.num_docs(), k);
    let mut trace = Vec::new();
    let mut likelihood_old = 0.0;
    let mut converged = 1.0f64;
    let mut i = 0;
    while (converged < 0.0 || converged > settings.em_convergence || i <= 2) && i < settings.em_max_iter {
        i += 1;
        log::info!("**** em iteration {i} ****");
        let mut ss = SuffStats::zeros(k, model.num_terms());
        let likelihood = e_step_batch(&corpus.docs, &model, &settings, &mut ss, &mut gammas)?;
        model = m_step(&ss, model.alpha, settings.estimate_alpha)?;

        converged = (likelihood_old - likelihood) / likelihood_old;
        if converged < 0.0 && settings.var_max_iter > 0 {
            settings.var_max_iter *= 2;
        }
        likelihood_old = likelihood;
        trace.push((likelihood, converged));
        observer(EmEvent::Iteration {
            iteration: i,
            likelihood,
            converged,
            model: &model,
            gammas: &gammas,
        })?;
    }

    let word_assignments = corpus
        .docs
        .par_iter()
        .map(|doc| e_step_doc(doc, &model, &settings).map(|(var, _)| var.assignments()))
        .collect::<Result<_>>()?;

    Ok(EmResult {
        model,
        gammas,
        trace,
        word_assignments,
        var_max_iter: settings.var_max_iter,
    })
}

/// Fits fresh variational parameters for each document against a fixed model.
/// Returns the `M x K` gammas and each document's bound.
pub fn vem_infer(model: &VemModel, corpus: &Corpus, settings: &VemSettings) -> Result<(Matrix, Vec<f64>)> {
    corpus.check_vocabulary(model.num_terms())?;
    let fitted: Vec<(DocVariational, f64)> = corpus
        .docs
        .par_iter()
        .map(|doc| e_step_doc(doc, model, settings))
        .collect::<Result<_>>()?;
    let mut gammas = Matrix::zeros(corpus.num_docs(), model.num_topics());
    let mut lhood = Vec::with_capacity(fitted.len());
    for (d, (var, l)) in fitted.into_iter().enumerate() {
        gammas.row_mut(d).copy_from_slice(&var.gamma);
        lhood.push(l);
    }
    Ok((gammas, lhood))
}
