//! End-to-end acceptance checks. Each test prints one `[PASS]`/`[FAIL]` line
//! (visible with `--nocapture`) and fails if its check fails.

use std::time::{Duration, Instant};

use lda_core::analytics::{self, DistanceMetric, RankWeights};
use lda_core::corpus::{parse_line_corpus, Corpus, Document};
use lda_core::gibbs::{self, cumulative_sample, full_conditional, GibbsHyper, GibbsState, InferOptions};
use lda_core::matrix::Matrix;
use lda_core::model_io;
use lda_core::parallel::{self, diagonal_schedule};
use lda_core::rng;
use lda_core::vem::{self, DocVariational, VemModel, VemSettings};
use rand::Rng;
use rand_distr::{Distribution, Gamma};
use statrs::function::gamma::{digamma as ref_digamma, ln_gamma};

fn report(id: &str, what: &str, limit: Option<Duration>, check: impl FnOnce() -> Result<String, String>) {
    let start = Instant::now();
    let mut outcome = check();
    let elapsed = start.elapsed();
    if let (Ok(_), Some(limit)) = (&outcome, limit) {
        if elapsed > limit {
            outcome = Err(format!("took {elapsed:?}, limit {limit:?}"));
        }
    }
    match outcome {
        Ok(detail) => println!("[PASS] {id} {what} ({elapsed:.2?}) {detail}"),
        Err(why) => {
            println!("[FAIL] {id} {what} ({elapsed:.2?}) {why}");
            panic!("{id} failed: {why}");
        }
    }
}

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

// ---------------------------------------------------------------- oracles

fn dirichlet<R: Rng>(alpha: &[f64], rng: &mut R) -> Vec<f64> {
    let g: Vec<f64> = alpha.iter().map(|&a| Gamma::new(a, 1.0).unwrap().sample(rng)).collect();
    let s: f64 = g.iter().sum();
    g.into_iter().map(|x| x / s).collect()
}

fn log_delta(xs: impl Iterator<Item = f64>) -> f64 {
    let mut sum = 0.0;
    let mut acc = 0.0;
    for x in xs {
        acc += ln_gamma(x);
        sum += x;
    }
    acc - ln_gamma(sum)
}

/// Log of p(w, z) up to a constant: the product of Dirichlet-multinomial
/// normalizers over topics and documents.
fn log_joint(corpus: &Corpus, z: &[Vec<u32>], k: usize, alpha: f64, beta: f64) -> f64 {
    let v = corpus.num_terms;
    let mut nkw = vec![vec![0.0; v]; k];
    let mut lj = 0.0;
    for (doc, zm) in corpus.docs.iter().zip(z) {
        let mut nmk = vec![0.0; k];
        for (w, &t) in doc.tokens().zip(zm) {
            nkw[t as usize][w] += 1.0;
            nmk[t as usize] += 1.0;
        }
        lj += log_delta(nmk.iter().map(|n| n + alpha)) - log_delta((0..k).map(|_| alpha));
    }
    for row in &nkw {
        lj += log_delta(row.iter().map(|n| n + beta)) - log_delta((0..v).map(|_| beta));
    }
    lj
}

fn recount(corpus: &Corpus, s: &GibbsState) -> (Vec<u32>, Vec<u32>, Vec<u32>, Vec<u32>) {
    let k = s.num_topics();
    let mut nw = vec![0; corpus.num_terms * k];
    let mut nwsum = vec![0; k];
    let mut nd = vec![0; corpus.num_docs() * k];
    let mut ndsum = vec![0; corpus.num_docs()];
    for (m, doc) in corpus.docs.iter().enumerate() {
        for (w, &t) in doc.tokens().zip(&s.z[m]) {
            let t = t as usize;
            nw[w * k + t] += 1;
            nwsum[t] += 1;
            nd[m * k + t] += 1;
            ndsum[m] += 1;
        }
    }
    (nw, nwsum, nd, ndsum)
}

fn counts_match(corpus: &Corpus, s: &GibbsState) -> bool {
    let (nw, nwsum, nd, ndsum) = recount(corpus, s);
    nw == s.nw && nwsum == s.nwsum && nd == s.nd && ndsum == s.ndsum
}

fn corpus_from_words(docs: &[Vec<usize>], v: usize) -> Corpus {
    Corpus::new(docs.iter().map(|d| Document::from_tokens(d.iter().copied())).collect(), v).unwrap()
}

/// Tokens drawn from `k` topics with disjoint vocabularies of `per_topic`
/// words each; each document prefers one topic with probability `purity`.
fn planted_corpus(k: usize, per_topic: usize, docs: usize, len: usize, purity: f64, seed: u64) -> Corpus {
    let mut rng = rng::stream(seed, 7, 7, 7);
    let words: Vec<Vec<usize>> = (0..docs)
        .map(|d| {
            let main = d % k;
            (0..len)
                .map(|_| {
                    let t = if rng.random::<f64>() < purity { main } else { rng.random_range(0..k) };
                    t * per_topic + rng.random_range(0..per_topic)
                })
                .collect()
        })
        .collect();
    corpus_from_words(&words, k * per_topic)
}

// ---------------------------------------------------------------- 1

fn check_conditional(corpus: &Corpus, z: &[Vec<u32>], hyper: GibbsHyper) -> f64 {
    let k = hyper.num_topics;
    let mut worst: f64 = 0.0;
    let mut weights = vec![0.0; k];
    for m in 0..corpus.num_docs() {
        let words: Vec<usize> = corpus.docs[m].tokens().collect();
        for (i, &w) in words.iter().enumerate() {
            let mut state = GibbsState::from_assignments(corpus, hyper, z.to_vec(), 0, 0).unwrap();
            let old = z[m][i] as usize;
            state.nw[w * k + old] -= 1;
            state.nwsum[old] -= 1;
            state.nd[m * k + old] -= 1;
            full_conditional(&state, m, w, &mut weights).unwrap();
            let total: f64 = weights.iter().sum();

            let mut lj = vec![0.0; k];
            let mut zz = z.to_vec();
            for (t, l) in lj.iter_mut().enumerate() {
                zz[m][i] = t as u32;
                *l = log_joint(corpus, &zz, k, hyper.alpha, hyper.beta);
            }
            let max = lj.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let norm: f64 = lj.iter().map(|l| (l - max).exp()).sum();
            for t in 0..k {
                let oracle = (lj[t] - max).exp() / norm;
                worst = worst.max((weights[t] / total - oracle).abs());
            }
        }
    }
    worst
}

fn all_assignments(sizes: &[usize], k: usize) -> Vec<Vec<Vec<u32>>> {
    let n: usize = sizes.iter().sum();
    let mut out = Vec::new();
    for code in 0..k.pow(n as u32) {
        let mut c = code;
        let mut flat = Vec::with_capacity(n);
        for _ in 0..n {
            flat.push((c % k) as u32);
            c /= k;
        }
        let mut z = Vec::new();
        let mut at = 0;
        for &s in sizes {
            z.push(flat[at..at + s].to_vec());
            at += s;
        }
        out.push(z);
    }
    out
}

#[test]
fn ac01_full_conditional_matches_joint_ratios() {
    report("AC-01", "full conditional vs brute-force joint", Some(Duration::from_secs(5)), || {
        let mut worst: f64 = 0.0;
        let mut cases = 0usize;
        let hypers = [(0.7, 0.3), (0.05, 2.0)];
        // exhaustive: up to 3 tokens in one or two documents, every word sequence and assignment
        for n in 1..=3usize {
            for v in 1..=4usize {
                for seq in 0..v.pow(n as u32) {
                    let mut c = seq;
                    let words: Vec<usize> = (0..n)
                        .map(|_| {
                            let w = c % v;
                            c /= v;
                            w
                        })
                        .collect();
                    for cut in 0..n {
                        let docs = if cut == 0 {
                            vec![words.clone()]
                        } else {
                            vec![words[..cut].to_vec(), words[cut..].to_vec()]
                        };
                        let corpus = corpus_from_words(&docs, v);
                        let sizes: Vec<usize> = corpus.docs.iter().map(|d| d.total()).collect();
                        for k in 1..=3 {
                            for &(a, b) in &hypers {
                                let hyper = GibbsHyper::new(k, a, b).unwrap();
                                for z in all_assignments(&sizes, k) {
                                    worst = worst.max(check_conditional(&corpus, &z, hyper));
                                    cases += 1;
                                }
                            }
                        }
                    }
                }
            }
        }
        // seeded random corpora up to 8 tokens
        let mut rng = rng::stream(2024, 0, 0, 0);
        for _ in 0..400 {
            let n = rng.random_range(4..=8);
            let v = rng.random_range(1..=4);
            let k = rng.random_range(1..=3);
            let split = rng.random_range(0..n);
            let words: Vec<usize> = (0..n).map(|_| rng.random_range(0..v)).collect();
            let docs = if split == 0 {
                vec![words.clone()]
            } else {
                vec![words[..split].to_vec(), words[split..].to_vec()]
            };
            let corpus = corpus_from_words(&docs, v);
            let z: Vec<Vec<u32>> = corpus
                .docs
                .iter()
                .map(|d| (0..d.total()).map(|_| rng.random_range(0..k) as u32).collect())
                .collect();
            let hyper = GibbsHyper::new(k, rng.random_range(0.01..3.0), rng.random_range(0.01..3.0)).unwrap();
            worst = worst.max(check_conditional(&corpus, &z, hyper));
            cases += 1;
        }
        ensure(worst <= 1e-10, || format!("max deviation {worst:e}"))?;
        Ok(format!("{cases} states, max deviation {worst:.2e}"))
    });
}

// ---------------------------------------------------------------- 2

#[test]
fn ac02_cumulative_sampler_goodness_of_fit() {
    report("AC-02", "cumulative sampler chi-square", Some(Duration::from_secs(1)), || {
        let weights = [0.2, 0.3, 0.5];
        let n = 100_000;
        let mut rng = rng::stream(99, 0, 0, 0);
        let mut hist = [0usize; 3];
        for _ in 0..n {
            hist[cumulative_sample(&weights, rng.random::<f64>()).map_err(|e| e.to_string())?] += 1;
        }
        let chi2: f64 = hist
            .iter()
            .zip(weights)
            .map(|(&o, p)| {
                let e = p * n as f64;
                (o as f64 - e).powi(2) / e
            })
            .sum();
        // upper 0.001 quantile of chi-square with 2 degrees of freedom is -2 ln 0.001
        let critical = -2.0 * 0.001f64.ln();
        ensure(chi2 < critical, || format!("chi2 {chi2} >= {critical}"))?;
        ensure(cumulative_sample(&[3.0], 0.99).ok() == Some(0), || "single face".into())?;
        ensure(cumulative_sample(&[0.0, 0.0], 0.5).is_err(), || "all-zero weights accepted".into())?;
        ensure(cumulative_sample(&[1.0, -1.0], 0.5).is_err(), || "negative weight accepted".into())?;
        Ok(format!("chi2 = {chi2:.3}, counts {hist:?}"))
    });
}

// ---------------------------------------------------------------- 3

#[test]
fn ac03_counts_match_recount_through_sweeps() {
    report("AC-03", "count tables equal recount of z", Some(Duration::from_secs(2)), || {
        let corpus = planted_corpus(4, 10, 20, 25, 0.7, 3);
        ensure(corpus.total_tokens() == 500, || "corpus size".into())?;
        let mut state = gibbs::init_state(&corpus, GibbsHyper::new(4, 0.5, 0.1).unwrap(), 5).unwrap();
        ensure(counts_match(&corpus, &state), || "after init".into())?;
        for i in 0..50 {
            gibbs::sweep(&mut state, &corpus).unwrap();
            ensure(counts_match(&corpus, &state), || format!("after sweep {}", i + 1))?;
        }
        Ok("init + 50 sweeps".into())
    });
}

// ---------------------------------------------------------------- 4

fn recovered_mass(phi: &Matrix, per_topic: usize) -> Vec<f64> {
    // for each planted word set, the best topic's probability mass on it
    (0..phi.rows())
        .map(|set| {
            (0..phi.rows())
                .map(|t| phi.row(t)[set * per_topic..(set + 1) * per_topic].iter().sum::<f64>())
                .fold(0.0, f64::max)
        })
        .collect()
}

#[test]
fn ac04_topic_recovery() {
    report("AC-04", "planted topic recovery", Some(Duration::from_secs(5)), || {
        let corpus = planted_corpus(2, 5, 20, 50, 0.8, 11);
        let state = gibbs::train(&corpus, GibbsHyper::new(2, 0.5, 0.1).unwrap(), 200, 17).unwrap();
        let phi = gibbs::estimate_phi(&state);
        let mass = recovered_mass(&phi, 5);
        let owner: Vec<usize> = (0..2)
            .map(|set| {
                (0..2)
                    .max_by(|&a, &b| {
                        let ma: f64 = phi.row(a)[set * 5..(set + 1) * 5].iter().sum();
                        let mb: f64 = phi.row(b)[set * 5..(set + 1) * 5].iter().sum();
                        ma.partial_cmp(&mb).unwrap()
                    })
                    .unwrap()
            })
            .collect();
        ensure(owner[0] != owner[1], || "both word sets went to one topic".into())?;
        ensure(mass.iter().all(|&m| m >= 0.9), || format!("mass {mass:?}"))?;
        Ok(format!("mass per planted topic {mass:.4?}"))
    });
}

// ---------------------------------------------------------------- 5

#[test]
fn ac05_perplexity_sanity() {
    report("AC-05", "perplexity of uniform model and after training", None, || {
        let corpus = planted_corpus(2, 5, 20, 50, 0.8, 11);
        let v = corpus.num_terms;
        let theta = Matrix::from_vec(corpus.num_docs(), 3, vec![1.0 / 3.0; corpus.num_docs() * 3]).unwrap();
        let phi = Matrix::from_vec(3, v, vec![1.0 / v as f64; 3 * v]).unwrap();
        let p = gibbs::perplexity(&theta, &phi, &corpus).unwrap();
        ensure((p - v as f64).abs() <= 1e-9, || format!("uniform perplexity {p}"))?;

        let hyper = GibbsHyper::new(2, 0.5, 0.1).unwrap();
        let mut wins = 0;
        for seed in 0..10 {
            let mut state = gibbs::init_state(&corpus, hyper, seed).unwrap();
            gibbs::sweep(&mut state, &corpus).unwrap();
            let m = gibbs::TopicModel::from_state(&state);
            let early = gibbs::perplexity(&m.theta, &m.phi, &corpus).unwrap();
            for _ in 1..100 {
                gibbs::sweep(&mut state, &corpus).unwrap();
            }
            let m = gibbs::TopicModel::from_state(&state);
            let late = gibbs::perplexity(&m.theta, &m.phi, &corpus).unwrap();
            if late < early {
                wins += 1;
            }
        }
        ensure(wins == 10, || format!("{wins}/10 seeds improved"))?;
        Ok(format!("uniform = {p}, 10/10 seeds improved"))
    });
}

// ---------------------------------------------------------------- 6

fn heldout_perplexity(state: &GibbsState, heldout: &Corpus) -> f64 {
    let phi = gibbs::estimate_phi(state);
    let inf = gibbs::infer_new(
        state,
        heldout,
        InferOptions {
            iters: 50,
            seed: 5,
            strict: true,
        },
    )
    .unwrap();
    gibbs::perplexity(&inf.theta, &phi, &inf.docs).unwrap()
}

#[test]
fn ac06_parallel_fidelity() {
    report("AC-06", "parallel schemes vs serial", Some(Duration::from_secs(30)), || {
        let small = planted_corpus(3, 6, 12, 20, 0.7, 4);
        let hyper = GibbsHyper::new(3, 0.5, 0.1).unwrap();
        let serial = gibbs::train(&small, hyper, 20, 8).unwrap();
        let ad = parallel::adlda_train(&small, hyper, 1, 20, 8).unwrap();
        ensure(ad == serial, || "P=1 AD-LDA differs from serial".into())?;
        let plan = parallel::partition_blocks(&small, 1, 1, 8).unwrap();
        let bl = parallel::blocked_train(&small, hyper, plan, 20, 8).unwrap();
        ensure(bl == serial, || "P=1 blocked differs from serial".into())?;

        let k = 5;
        let full = planted_corpus(k, 20, 120, 50, 0.75, 21);
        let train = Corpus::new(full.docs[..100].to_vec(), full.num_terms).unwrap();
        let heldout = Corpus::new(full.docs[100..].to_vec(), full.num_terms).unwrap();
        ensure(train.total_tokens() == 5000, || "training corpus size".into())?;
        let hyper = GibbsHyper::new(k, 0.5, 0.1).unwrap();
        let iters = 100;
        let seed = 31;

        let serial = gibbs::train(&train, hyper, iters, seed).unwrap();
        let p_serial = heldout_perplexity(&serial, &heldout);
        let ad = parallel::adlda_train(&train, hyper, 4, iters, seed).unwrap();
        ensure(counts_match(&train, &ad), || "AD-LDA counts inconsistent".into())?;
        let p_ad = heldout_perplexity(&ad, &heldout);
        let plan = parallel::partition_blocks(&train, 3, 10, seed).unwrap();
        let bl = parallel::blocked_train(&train, hyper, plan, iters, seed).unwrap();
        ensure(counts_match(&train, &bl), || "blocked counts inconsistent".into())?;
        let p_bl = heldout_perplexity(&bl, &heldout);

        let gap_ad = (p_ad - p_serial).abs() / p_serial;
        let gap_bl = (p_bl - p_serial).abs() / p_serial;
        let detail = format!(
            "serial {p_serial:.3}, AD-LDA(4) {p_ad:.3} ({:.2}%), blocked(3) {p_bl:.3} ({:.2}%)",
            100.0 * gap_ad,
            100.0 * gap_bl
        );
        ensure(gap_ad <= 0.05 && gap_bl <= 0.02, || detail.clone())?;
        Ok(detail)
    });
}

// ---------------------------------------------------------------- 7

#[test]
fn ac07_diagonal_schedule() {
    report("AC-07", "diagonal schedule conflict freedom", None, || {
        for p in 1..=8 {
            let groups = diagonal_schedule(p);
            ensure(groups.len() == p, || format!("P={p}: {} groups", groups.len()))?;
            let mut seen = vec![vec![0; p]; p];
            for g in &groups {
                ensure(g.len() == p, || format!("P={p}: group size {}", g.len()))?;
                for (i, a) in g.iter().enumerate() {
                    seen[a.0][a.1] += 1;
                    for b in &g[i + 1..] {
                        ensure(a.0 != b.0 && a.1 != b.1, || format!("P={p}: {a:?} conflicts with {b:?}"))?;
                    }
                }
            }
            ensure(seen.iter().flatten().all(|&c| c == 1), || format!("P={p}: blocks not covered once"))?;
        }
        let three = diagonal_schedule(3);
        let expect = vec![
            vec![(0, 0), (1, 1), (2, 2)],
            vec![(0, 1), (1, 2), (2, 0)],
            vec![(0, 2), (1, 0), (2, 1)],
        ];
        ensure(three == expect, || format!("P=3 listing {three:?}"))?;
        Ok("P = 1..8".into())
    });
}

// ---------------------------------------------------------------- 8

fn random_model<R: Rng>(k: usize, v: usize, rng: &mut R) -> VemModel {
    let mut log_beta = Matrix::zeros(k, v);
    for t in 0..k {
        let row = dirichlet(&vec![0.5; v], rng);
        for (w, p) in row.into_iter().enumerate() {
            log_beta.set(t, w, p.max(1e-300).ln());
        }
    }
    VemModel::new(log_beta, rng.random_range(0.05..2.0)).unwrap()
}

#[test]
fn ac08_variational_coordinate_ascent() {
    report("AC-08", "variational bound monotone, gamma closed form", None, || {
        let mut rng = rng::stream(8, 8, 8, 8);
        let settings = VemSettings {
            var_max_iter: 60,
            var_convergence: 1e-14,
            ..VemSettings::default()
        };
        let mut worst_drop: f64 = 0.0;
        let mut worst_gamma: f64 = 0.0;
        for _ in 0..100 {
            let k = rng.random_range(2..=6);
            let v = rng.random_range(5..=40);
            let model = random_model(k, v, &mut rng);
            let n = rng.random_range(1..=60);
            let doc = Document::from_tokens((0..n).map(|_| rng.random_range(0..v)));

            let start = DocVariational {
                gamma: vec![model.alpha + doc.total() as f64 / k as f64; k],
                phi: Matrix::from_vec(doc.len(), k, vec![1.0 / k as f64; doc.len() * k]).unwrap(),
            };
            let l0 = vem::compute_elbo(&doc, &model, &start.gamma, &start.phi).unwrap();
            let (var, trace) = vem::e_step_doc_traced(&doc, &model, &settings).unwrap();
            let mut prev = l0;
            for &l in &trace {
                worst_drop = worst_drop.max(prev - l);
                prev = l;
            }
            for t in 0..k {
                let closed = model.alpha
                    + doc
                        .counts
                        .iter()
                        .enumerate()
                        .map(|(i, &c)| c as f64 * var.phi.get(i, t))
                        .sum::<f64>();
                worst_gamma = worst_gamma.max((closed - var.gamma[t]).abs());
            }
            for row in var.phi.iter_rows() {
                ensure((row.iter().sum::<f64>() - 1.0).abs() <= 1e-12, || "phi row not normalized".into())?;
            }
        }
        ensure(worst_drop <= 1e-9, || format!("bound dropped by {worst_drop:e}"))?;
        ensure(worst_gamma <= 1e-8, || format!("gamma off closed form by {worst_gamma:e}"))?;
        Ok(format!("max drop {worst_drop:.1e}, max gamma gap {worst_gamma:.1e}"))
    });
}

// ---------------------------------------------------------------- 9

#[test]
fn ac09_special_functions() {
    report("AC-09", "lgamma/digamma/trigamma consistency", None, || {
        let mut worst_psi: f64 = 0.0;
        let mut worst_tri: f64 = 0.0;
        let mut worst_ref: f64 = 0.0;
        let n = 400;
        for i in 0..=n {
            let x = 0.1 * 10f64.powf(4.0 * i as f64 / n as f64);
            let h = 1e-5 * x.min(1.0);
            let fd_psi = (vem::lgamma(x + h) - vem::lgamma(x - h)) / (2.0 * h);
            let fd_tri = (vem::digamma(x + h) - vem::digamma(x - h)) / (2.0 * h);
            worst_psi = worst_psi.max((fd_psi - vem::digamma(x)).abs());
            worst_tri = worst_tri.max((fd_tri - vem::trigamma(x)).abs());
            worst_ref = worst_ref
                .max((vem::lgamma(x) - ln_gamma(x)).abs() / ln_gamma(x).abs().max(1.0))
                .max((vem::digamma(x) - ref_digamma(x)).abs());
        }
        ensure(worst_psi <= 1e-6, || format!("digamma vs FD {worst_psi:e}"))?;
        ensure(worst_tri <= 1e-6, || format!("trigamma vs FD {worst_tri:e}"))?;
        ensure(worst_ref <= 1e-9, || format!("disagreement with reference implementation {worst_ref:e}"))?;
        let d1 = vem::digamma(1.0);
        ensure((d1 + 0.5772156649).abs() <= 1e-9, || format!("digamma(1) = {d1}"))?;
        for x in [0.5, 1.0, 3.7] {
            let r = vem::digamma(x + 1.0) - vem::digamma(x) - 1.0 / x;
            ensure(r.abs() <= 1e-12, || format!("recurrence at {x}: {r:e}"))?;
        }
        Ok(format!("FD gaps {worst_psi:.1e} / {worst_tri:.1e}"))
    });
}

// ---------------------------------------------------------------- 10

#[test]
fn ac10_newton_alpha() {
    report("AC-10", "Newton update of alpha", None, || {
        ensure(vem::INIT_ALPHA_NEWTON == 100.0 && vem::NEWTON_THRESH == 1e-5, || "constants".into())?;
        let fit = vem::opt_alpha(-2.0, 1, 2).map_err(|e| e.to_string())?;
        ensure((fit.alpha - 1.0).abs() <= 1e-5, || format!("alpha {}", fit.alpha))?;

        let mut rng = rng::stream(10, 10, 10, 10);
        let mut worst: f64 = 0.0;
        for _ in 0..50 {
            let k = rng.random_range(2..=50usize);
            let d = rng.random_range(1..=2000usize);
            let root: f64 = 10f64.powf(rng.random_range(-1.3..1.3));
            // choose the statistic so that `root` zeroes the derivative
            let ss = -(d as f64) * (k as f64 * ref_digamma(k as f64 * root) - k as f64 * ref_digamma(root));
            let fit = vem::opt_alpha(ss, d, k).map_err(|e| format!("root {root}, K {k}, D {d}: {e}"))?;
            let residual = vem::d_alhood(fit.alpha, ss, d, k).abs();
            ensure(fit.converged, || format!("no convergence for root {root}, K {k}, D {d}"))?;
            ensure(residual <= 1e-5, || format!("residual {residual:e} for root {root}"))?;
            ensure((fit.alpha - root).abs() <= 1e-6 * root.max(1.0), || format!("{} vs root {root}", fit.alpha))?;
            worst = worst.max(residual);
        }
        Ok(format!("alpha(K=2,D=1,ss=-2) = {:.8}, worst residual {worst:.1e}", fit.alpha))
    });
}

// ---------------------------------------------------------------- 11

#[test]
fn ac11_expected_log_theta() {
    report("AC-11", "Monte Carlo E[log theta]", None, || {
        let mut rng = rng::stream(11, 11, 11, 11);
        let draws = 20_000;
        let mut worst_z: f64 = 0.0;
        for _ in 0..20 {
            let k = rng.random_range(2..=4);
            let gamma: Vec<f64> = (0..k).map(|_| rng.random_range(0.5..5.0)).collect();
            let mut sum = vec![0.0; k];
            let mut sq = vec![0.0; k];
            for _ in 0..draws {
                let theta = dirichlet(&gamma, &mut rng);
                for i in 0..k {
                    let l = theta[i].ln();
                    sum[i] += l;
                    sq[i] += l * l;
                }
            }
            let total: f64 = gamma.iter().sum();
            for i in 0..k {
                let mean = sum[i] / draws as f64;
                let var = sq[i] / draws as f64 - mean * mean;
                let se = (var / draws as f64).sqrt();
                let expect = vem::digamma(gamma[i]) - vem::digamma(total);
                let z = (mean - expect).abs() / se;
                worst_z = worst_z.max(z);
                ensure(z <= 3.0, || format!("gamma {gamma:?}, component {i}: {z:.2} standard errors"))?;
            }
        }
        Ok(format!("worst deviation {worst_z:.2} SE"))
    });
}

// ---------------------------------------------------------------- 12

#[test]
fn ac12_format_fidelity() {
    report("AC-12", "model file round trips", None, || {
        let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
        let text = "apple pear fig\npear pear plum apple\n\nfig kiwi\n";
        let (corpus, vocab) = parse_line_corpus(text, None).unwrap();
        let hyper = GibbsHyper::new(3, 0.5, 0.1).unwrap();
        let state = gibbs::train(&corpus, hyper, 5, 12).unwrap();

        model_io::save_gibbs_model(dir.path(), "model-final", &state, &corpus, &vocab, 3).unwrap();
        model_io::save_wordmap(dir.path(), &vocab).unwrap();
        let loaded = model_io::load_gibbs_model(dir.path(), "model-final").unwrap();
        ensure(loaded.state == state, || "tassign round trip".into())?;
        ensure(loaded.vocab == vocab, || "wordmap round trip".into())?;
        ensure(loaded.corpus == corpus, || "corpus recovered from tassign".into())?;

        let model = gibbs::TopicModel::from_state(&state);
        for (name, m) in [("theta", &model.theta), ("phi", &model.phi)] {
            let back = model_io::parse_matrix(&std::fs::read_to_string(dir.path().join(format!("model-final.{name}"))).unwrap()).unwrap();
            ensure(back.rows() == m.rows() && back.cols() == m.cols(), || format!("{name} shape"))?;
            for (a, b) in back.as_slice().iter().zip(m.as_slice()) {
                ensure((a - b).abs() <= 5e-7, || format!("{name} cell {a} vs {b}"))?;
            }
            for row in back.iter_rows() {
                ensure((row.iter().sum::<f64>() - 1.0).abs() <= 1e-5, || format!("{name} row sum"))?;
            }
        }
        let twords = std::fs::read_to_string(dir.path().join("model-final.twords")).unwrap();
        ensure(twords.starts_with("Topic 0th:\n"), || "twords header".into())?;
        ensure(twords.lines().count() == 3 * 4, || "twords line count".into())?;

        let mut rng = rng::stream(12, 0, 0, 0);
        let vm = random_model(3, 6, &mut rng);
        let prefix = dir.path().join("final");
        model_io::save_vem_model(&prefix, &vm).unwrap();
        let back = model_io::load_vem_model(&prefix).unwrap();
        ensure((back.alpha - vm.alpha).abs() <= 1e-10, || "alpha precision".into())?;
        for (a, b) in back.log_beta.as_slice().iter().zip(vm.log_beta.as_slice()) {
            ensure((a - b).abs() <= 1e-10, || format!("beta {a} vs {b}"))?;
        }
        let other = std::fs::read_to_string(model_io::with_ext(&prefix, "other")).unwrap();
        let keys: Vec<&str> = other.lines().map(|l| l.split(' ').next().unwrap()).collect();
        ensure(keys == ["num_topics", "num_terms", "alpha"], || format!(".other keys {keys:?}"))?;
        ensure(other.starts_with("num_topics 3\nnum_terms 6\nalpha "), || ".other shape".into())?;

        let gammas = Matrix::from_rows(vec![vec![1.5, 0.25], vec![3.0, 7.125]]).unwrap();
        let g = model_io::parse_matrix(&model_io::format_gamma(&gammas)).unwrap();
        ensure(g == gammas, || "gamma round trip".into())?;

        let wa_corpus = Corpus::new(vec![Document::from_pairs([(12, 1), (7, 1), (99, 1)]).unwrap()], 100).unwrap();
        let line = model_io::format_word_assignments(&wa_corpus, &[vec![5, 0, 23]]).unwrap();
        ensure(line == "003 0012:05 0007:00 0099:23\n", || format!("word assignments {line:?}"))?;

        let trace = [(-53850.3207874086, f64::INFINITY), (-48731.8030157054, 9.50508e-02)];
        let lik = model_io::format_likelihood_trace(&trace);
        let parsed = model_io::parse_likelihood_trace(&lik).unwrap();
        ensure(lik.lines().next().unwrap().trim_end().ends_with("inf"), || "first converged column".into())?;
        ensure(lik.lines().nth(1).unwrap().ends_with("9.50508e-02"), || lik.clone())?;
        let recomputed = (parsed[0].0 - parsed[1].0) / parsed[0].0;
        ensure((recomputed - parsed[1].1).abs() <= 1e-6, || "converged column".into())?;
        Ok("gibbs and variational families".into())
    });
}

// ---------------------------------------------------------------- 13

#[test]
fn ac13_analytics_examples() {
    report("AC-13", "distances and rankings", None, || {
        let hs = analytics::distance(&[1.0, 0.0], &[0.0, 1.0], DistanceMetric::HellingerSq).unwrap();
        ensure(hs == 2.0, || format!("hellinger {hs}"))?;
        let kl = analytics::distance(&[1.0, 0.0], &[0.5, 0.5], DistanceMetric::Kl).unwrap();
        ensure((kl - 2f64.ln()).abs() < 1e-12, || format!("kl {kl}"))?;
        let p = [0.1, 0.2, 0.7];
        for m in DistanceMetric::ALL {
            let d = analytics::distance(&p, &p, m).unwrap();
            ensure(d.abs() < 1e-12, || format!("{m} self distance {d}"))?;
        }

        let theta = Matrix::from_rows(vec![vec![1.0, 0.0], vec![0.0, 1.0], vec![0.6, 0.4]]).unwrap();
        let near = analytics::similar_docs(&theta, 0, 2, DistanceMetric::HellingerSq).unwrap();
        ensure(near.ids() == [2, 1], || format!("similar docs {:?}", near.items))?;
        let dup = Matrix::from_rows(vec![vec![0.3, 0.7], vec![0.9, 0.1], vec![0.3, 0.7]]).unwrap();
        let near = analytics::similar_docs(&dup, 0, 1, DistanceMetric::HellingerSq).unwrap();
        ensure(near.items == [(2, 0.0)], || "duplicate row first".into())?;

        let flat = Matrix::from_rows(vec![vec![0.25; 4]]).unwrap();
        let tags: Vec<usize> = analytics::auto_tags(&[1.0], &flat, 4).unwrap().iter().map(|t| t.0).collect();
        ensure(tags == [0, 1, 2, 3], || format!("tags {tags:?}"))?;

        // topic 0: word m once in document m (uniform over documents and words);
        // topic 1: three extra copies of word 0 in document 0 (one-hot on both sides)
        let docs = (0..4).map(|m| Document::from_tokens(if m == 0 { vec![0; 4] } else { vec![m] })).collect();
        let corpus = Corpus::new(docs, 4).unwrap();
        let z = vec![vec![0, 1, 1, 1], vec![0], vec![0], vec![0]];
        let state = GibbsState::from_assignments(&corpus, GibbsHyper::new(2, 1e-12, 1e-12).unwrap(), z, 0, 0).unwrap();
        let ranked = analytics::topic_rank(&state, RankWeights::default(), DistanceMetric::HellingerSq).unwrap();
        ensure(ranked.ids() == [1, 0], || format!("topic rank {:?}", ranked.items))?;
        let onehot = [1.0, 0.0, 0.0, 0.0];
        let limit: f64 = onehot.iter().map(|p: &f64| (p.sqrt() - 0.5f64).powi(2)).sum();
        let (top, bottom) = (ranked.items[0].1, ranked.items[1].1);
        // smoothing of 1e-12 moves the scores by about sqrt(1e-12)
        ensure((top - 0.5 * (limit + limit)).abs() < 1e-5, || format!("one-hot score {top} vs {limit}"))?;
        ensure(bottom.abs() < 1e-5, || format!("uniform score {bottom}"))?;

        let prior = analytics::topic_prior(&Matrix::from_rows(vec![vec![0.5, 0.5], vec![1.0, 0.0]]).unwrap());
        ensure(prior == [0.75, 0.25], || format!("prior {prior:?}"))?;
        let big = gibbs::train(&planted_corpus(3, 5, 10, 20, 0.7, 2), GibbsHyper::new(3, 0.5, 0.1).unwrap(), 10, 2).unwrap();
        let s: f64 = analytics::topic_prior(&gibbs::estimate_theta(&big)).iter().sum();
        ensure((s - 1.0).abs() <= 1e-12, || format!("prior sum {s}"))?;

        let wr = analytics::word_rank(&big, DistanceMetric::Kl).unwrap();
        ensure(wr.items[0].1 == 1.0, || "top word not normalized to 1".into())?;
        Ok("distances, similar docs, tags, topic/word rank, prior".into())
    });
}

// ---------------------------------------------------------------- 14

#[test]
fn ac14_checkpoint_resume() {
    report("AC-14", "resume from tassign checkpoint", None, || {
        let (corpus, vocab) = parse_line_corpus(
            &(0..30)
                .map(|d| (0..15).map(|i| format!("w{}", (d * 7 + i * i) % 23)).collect::<Vec<_>>().join(" "))
                .collect::<Vec<_>>()
                .join("\n"),
            None,
        )
        .unwrap();
        let hyper = GibbsHyper::new(4, 0.5, 0.1).unwrap();
        let full = gibbs::train(&corpus, hyper, 100, 42).unwrap();

        let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
        let half = gibbs::train(&corpus, hyper, 50, 42).unwrap();
        model_io::save_gibbs_model(dir.path(), &model_io::gibbs_checkpoint_tag(50), &half, &corpus, &vocab, 5).unwrap();
        model_io::save_wordmap(dir.path(), &vocab).unwrap();
        let mut resumed = model_io::load_gibbs_model(dir.path(), "model-050").unwrap();
        ensure(resumed.state.sweeps_done == 50, || "sweep counter".into())?;
        for _ in 0..50 {
            gibbs::sweep(&mut resumed.state, &resumed.corpus).unwrap();
        }
        ensure(resumed.state.z == full.z, || "assignments differ".into())?;
        ensure(
            resumed.state.nw == full.nw && resumed.state.nd == full.nd && resumed.state.nwsum == full.nwsum,
            || "counts differ".into(),
        )?;
        Ok("100 sweeps == 50 + checkpoint + 50".into())
    });
}
