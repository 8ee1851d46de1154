//! Text formats of trained models.
//!
//! Gibbs models are stored as a family of files sharing a tag, e.g.
//! `model-final.tassign`, `.theta`, `.phi`, `.twords` and `.others`, plus a
//! `wordmap.txt` for the vocabulary. Variational models use `<tag>.beta`,
//! `<tag>.gamma` and `<tag>.other`, with `likelihood.dat` and
//! `word-assignments.dat` written next to them.
//!
//! `format_*` functions build file images, `parse_*` functions read them, and
//! `save_*`/`load_*` tie them to paths.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use crate::analytics::top_indices;
use crate::corpus::{Corpus, Document, Vocabulary};
use crate::error::{LdaError, Result};
use crate::gibbs::{Count, GibbsHyper, GibbsState};
use crate::matrix::Matrix;
use crate::vem::VemModel;

/// Tag of the final Gibbs model files.
pub const GIBBS_FINAL_TAG: &str = "model-final";
pub const WORDMAP_FILE: &str = "wordmap.txt";
pub const LIKELIHOOD_FILE: &str = "likelihood.dat";
pub const WORD_ASSIGNMENTS_FILE: &str = "word-assignments.dat";

/// `model-050`-style tag for a checkpoint after `iteration` sweeps.
pub fn gibbs_checkpoint_tag(iteration: usize) -> String {
    format!("model-{iteration:03}")
}

/// Joins `tag` and `ext` under `dir`: `dir/tag.ext`.
pub fn tagged_path(dir: &Path, tag: &str, ext: &str) -> PathBuf {
    dir.join(format!("{tag}.{ext}"))
}

fn read_file(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| {
        LdaError::Io(std::io::Error::new(e.kind(), format!("{}: {e}", path.display())))
    })
}

fn write_file(path: &Path, contents: &str) -> Result<()> {
    fs::write(path, contents).map_err(|e| {
        LdaError::Io(std::io::Error::new(e.kind(), format!("{}: {e}", path.display())))
    })
}

/// One line per document of `word:topic` pairs, one per token.
pub fn format_tassign(state: &GibbsState, corpus: &Corpus) -> String {
    let mut out = String::new();
    for (doc, zm) in corpus.docs.iter().zip(&state.z) {
        for (i, (w, t)) in doc.tokens().zip(zm).enumerate() {
            if i > 0 {
                out.push(' ');
            }
            let _ = write!(out, "{w}:{t}");
        }
        out.push('\n');
    }
    out
}

/// Reads `word:topic` lines into per-document token and topic lists.
pub fn parse_tassign_pairs(text: &str) -> Result<Vec<Vec<(usize, Count)>>> {
    text.lines()
        .enumerate()
        .map(|(i, line)| {
            line.split_whitespace()
                .map(|pair| {
                    let (w, t) = pair
                        .split_once(':')
                        .ok_or_else(|| LdaError::parse(i + 1, format!("expected word:topic, got {pair:?}")))?;
                    let w = w
                        .parse()
                        .map_err(|_| LdaError::parse(i + 1, format!("bad word id in {pair:?}")))?;
                    let t = t
                        .parse()
                        .map_err(|_| LdaError::parse(i + 1, format!("bad topic id in {pair:?}")))?;
                    Ok((w, t))
                })
                .collect()
        })
        .collect()
}

/// Rebuilds a sampler state from a tassign image checked against `corpus`.
pub fn parse_tassign(text: &str, corpus: &Corpus, hyper: GibbsHyper, seed: u64, sweeps_done: u64) -> Result<GibbsState> {
    let rows = parse_tassign_pairs(text)?;
    if rows.len() != corpus.num_docs() {
        return Err(LdaError::Format(format!(
            "tassign has {} lines, corpus has {} documents",
            rows.len(),
            corpus.num_docs()
        )));
    }
    let mut z = Vec::with_capacity(rows.len());
    for (m, (row, doc)) in rows.iter().zip(&corpus.docs).enumerate() {
        if row.len() != doc.total() {
            return Err(LdaError::Format(format!(
                "tassign line {}: {} tokens, document has {}",
                m + 1,
                row.len(),
                doc.total()
            )));
        }
        if let Some(((w, _), expect)) = row.iter().zip(doc.tokens()).find(|((w, _), e)| w != e) {
            return Err(LdaError::Format(format!(
                "tassign line {}: word {w} where the corpus has {expect}",
                m + 1
            )));
        }
        z.push(row.iter().map(|p| p.1).collect());
    }
    GibbsState::from_assignments(corpus, hyper, z, seed, sweeps_done)
}

/// Recovers the training corpus from a tassign image alone.
pub fn corpus_from_tassign(text: &str, num_terms: usize) -> Result<Corpus> {
    let rows = parse_tassign_pairs(text)?;
    let docs = rows
        .iter()
        .map(|row| Document::from_tokens(row.iter().map(|p| p.0)))
        .collect();
    let corpus = Corpus { docs, num_terms };
    corpus.check_vocabulary(num_terms)?;
    Ok(corpus)
}

/// Rows of six-decimal numbers separated by single spaces.
pub fn format_matrix(m: &Matrix) -> String {
    let mut out = String::new();
    for row in m.iter_rows() {
        for (j, x) in row.iter().enumerate() {
            if j > 0 {
                out.push(' ');
            }
            let _ = write!(out, "{x:.6}");
        }
        out.push('\n');
    }
    out
}

/// Whitespace-separated numeric rows; blank lines are ignored.
pub fn parse_matrix(text: &str) -> Result<Matrix> {
    let rows = text
        .lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, line)| {
            line.split_whitespace()
                .map(|x| {
                    x.parse::<f64>()
                        .map_err(|_| LdaError::parse(i + 1, format!("bad number {x:?}")))
                })
                .collect::<Result<Vec<_>>>()
        })
        .collect::<Result<Vec<_>>>()?;
    Matrix::from_rows(rows)
}

/// Per topic a `Topic {k}th:` header and the `n` most probable terms.
pub fn format_twords(phi: &Matrix, vocab: &Vocabulary, n: usize) -> Result<String> {
    if vocab.len() < phi.cols() {
        return Err(LdaError::VocabularyMismatch {
            vocab_size: vocab.len(),
            ids: (vocab.len()..phi.cols()).collect(),
        });
    }
    let n = if n > phi.cols() {
        log::warn!("asked for {n} words per topic, vocabulary has {}", phi.cols());
        phi.cols()
    } else {
        n
    };
    let mut out = String::new();
    for (k, row) in phi.iter_rows().enumerate() {
        let _ = writeln!(out, "Topic {k}th:");
        for w in top_indices(row, n) {
            let _ = writeln!(out, "{} {:.6}", vocab.term(w).unwrap_or_default(), row[w]);
        }
    }
    Ok(out)
}

/// Side file with the sampler settings needed to resume from a tassign.
pub fn format_gibbs_others(state: &GibbsState) -> String {
    format!(
        "alpha={}\nbeta={}\nntopics={}\nndocs={}\nnwords={}\nliter={}\nseed={}\n",
        state.hyper.alpha,
        state.hyper.beta,
        state.num_topics(),
        state.num_docs(),
        state.num_terms,
        state.sweeps_done,
        state.seed
    )
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GibbsOthers {
    pub hyper: GibbsHyper,
    pub num_docs: usize,
    pub num_terms: usize,
    pub sweeps_done: u64,
    pub seed: u64,
}

pub fn parse_gibbs_others(text: &str) -> Result<GibbsOthers> {
    let get = |key: &str| -> Result<String> {
        text.lines()
            .filter_map(|l| l.split_once('='))
            .find(|(k, _)| k.trim() == key)
            .map(|(_, v)| v.trim().to_string())
            .ok_or_else(|| LdaError::Format(format!("missing {key} in model settings")))
    };
    fn num<T: std::str::FromStr>(key: &str, v: String) -> Result<T> {
        v.parse()
            .map_err(|_| LdaError::Format(format!("bad value {v:?} for {key}")))
    }
    let alpha = num("alpha", get("alpha")?)?;
    let beta = num("beta", get("beta")?)?;
    let k = num("ntopics", get("ntopics")?)?;
    let num_docs = num("ndocs", get("ndocs")?)?;
    let num_terms = num("nwords", get("nwords")?)?;
    let sweeps_done = num("liter", get("liter")?)?;
    let seed = match get("seed") {
        Ok(v) => num("seed", v)?,
        Err(_) => 0,
    };
    Ok(GibbsOthers {
        hyper: GibbsHyper::new(k, alpha, beta)?,
        num_docs,
        num_terms,
        sweeps_done,
        seed,
    })
}

/// Writes `<tag>.tassign/.theta/.phi/.twords/.others` under `dir`.
pub fn save_gibbs_model(dir: &Path, tag: &str, state: &GibbsState, corpus: &Corpus, vocab: &Vocabulary, twords: usize) -> Result<()> {
    let model = crate::gibbs::TopicModel::from_state(state);
    write_file(&tagged_path(dir, tag, "tassign"), &format_tassign(state, corpus))?;
    write_file(&tagged_path(dir, tag, "theta"), &format_matrix(&model.theta))?;
    write_file(&tagged_path(dir, tag, "phi"), &format_matrix(&model.phi))?;
    write_file(&tagged_path(dir, tag, "twords"), &format_twords(&model.phi, vocab, twords)?)?;
    write_file(&tagged_path(dir, tag, "others"), &format_gibbs_others(state))?;
    Ok(())
}

pub fn save_wordmap(dir: &Path, vocab: &Vocabulary) -> Result<()> {
    let mut buf = Vec::new();
    crate::corpus::write_wordmap(vocab, &mut buf)?;
    fs::write(dir.join(WORDMAP_FILE), buf)?;
    Ok(())
}

pub fn load_wordmap(dir: &Path) -> Result<Vocabulary> {
    let text = read_file(&dir.join(WORDMAP_FILE))?;
    crate::corpus::read_wordmap(text.as_bytes())
}

/// A Gibbs model restored from disk.
#[derive(Debug, Clone)]
pub struct LoadedGibbs {
    pub state: GibbsState,
    pub corpus: Corpus,
    pub vocab: Vocabulary,
}

/// Reads `<tag>.others`, `<tag>.tassign` and the word map from `dir`.
/// The training corpus is recovered from the tassign file.
pub fn load_gibbs_model(dir: &Path, tag: &str) -> Result<LoadedGibbs> {
    let others = parse_gibbs_others(&read_file(&tagged_path(dir, tag, "others"))?)?;
    let vocab = load_wordmap(dir)?;
    if vocab.len() != others.num_terms {
        return Err(LdaError::Format(format!(
            "word map has {} terms, model has {}",
            vocab.len(),
            others.num_terms
        )));
    }
    let text = read_file(&tagged_path(dir, tag, "tassign"))?;
    let corpus = corpus_from_tassign(&text, others.num_terms)?;
    if corpus.num_docs() != others.num_docs {
        return Err(LdaError::Format(format!(
            "tassign has {} documents, model settings say {}",
            corpus.num_docs(),
            others.num_docs
        )));
    }
    let state = parse_tassign(&text, &corpus, others.hyper, others.seed, others.sweeps_done)?;
    Ok(LoadedGibbs { state, corpus, vocab })
}

/// `log_beta` rows, every entry written as `" %5.10f"`.
pub fn format_beta(model: &VemModel) -> String {
    let mut out = String::new();
    for row in model.log_beta.iter_rows() {
        for x in row {
            let _ = write!(out, " {x:5.10}");
        }
        out.push('\n');
    }
    out
}

/// Gamma rows, `"%5.10f"` separated by single spaces.
pub fn format_gamma(gammas: &Matrix) -> String {
    let mut out = String::new();
    for row in gammas.iter_rows() {
        for (j, x) in row.iter().enumerate() {
            if j > 0 {
                out.push(' ');
            }
            let _ = write!(out, "{x:5.10}");
        }
        out.push('\n');
    }
    out
}

pub fn format_other(model: &VemModel) -> String {
    format!(
        "num_topics {}\nnum_terms {}\nalpha {:5.10}\n",
        model.num_topics(),
        model.num_terms(),
        model.alpha
    )
}

/// `(num_topics, num_terms, alpha)` from a `.other` image.
pub fn parse_other(text: &str) -> Result<(usize, usize, f64)> {
    let find = |key: &str| -> Result<&str> {
        text.lines()
            .filter_map(|l| l.split_once(char::is_whitespace))
            .find(|(k, _)| *k == key)
            .map(|(_, v)| v.trim())
            .ok_or_else(|| LdaError::Format(format!("missing {key} in .other file")))
    };
    let bad = |key: &str| LdaError::Format(format!("bad value for {key} in .other file"));
    let k = find("num_topics")?.parse().map_err(|_| bad("num_topics"))?;
    let v = find("num_terms")?.parse().map_err(|_| bad("num_terms"))?;
    let alpha = find("alpha")?.parse().map_err(|_| bad("alpha"))?;
    Ok((k, v, alpha))
}

/// Model from `.other` and `.beta` images.
pub fn parse_vem_model(other: &str, beta: &str) -> Result<VemModel> {
    let (k, v, alpha) = parse_other(other)?;
    let log_beta = parse_matrix(beta)?;
    if log_beta.rows() != k || log_beta.cols() != v {
        return Err(LdaError::Format(format!(
            ".beta is {}x{}, .other says {k}x{v}",
            log_beta.rows(),
            log_beta.cols()
        )));
    }
    VemModel::new(log_beta, alpha)
}

/// Writes `<prefix>.beta` and `<prefix>.other`; `prefix` is a path such as `dir/final`.
pub fn save_vem_model(prefix: &Path, model: &VemModel) -> Result<()> {
    write_file(&with_ext(prefix, "beta"), &format_beta(model))?;
    write_file(&with_ext(prefix, "other"), &format_other(model))
}

pub fn save_gamma(path: &Path, gammas: &Matrix) -> Result<()> {
    write_file(path, &format_gamma(gammas))
}

/// Reads `<prefix>.other` and `<prefix>.beta`. Gammas are not part of a model.
pub fn load_vem_model(prefix: &Path) -> Result<VemModel> {
    let other = read_file(&with_ext(prefix, "other"))?;
    let beta = read_file(&with_ext(prefix, "beta"))?;
    parse_vem_model(&other, &beta)
}

/// `prefix` with `.ext` appended (not replacing an existing extension).
pub fn with_ext(prefix: &Path, ext: &str) -> PathBuf {
    let mut s = prefix.as_os_str().to_owned();
    s.push(".");
    s.push(ext);
    PathBuf::from(s)
}

fn push_padded(out: &mut String, value: usize, width: usize, what: &str) {
    let limit = 10usize.pow(width as u32);
    if value >= limit {
        log::warn!("{what} {value} does not fit in {width} digits; field widened");
    }
    let _ = write!(out, "{value:0width$}");
}

/// One line per document: the distinct-term count (`%03d`) and a
/// ` %04d:%02d` word/topic pair per distinct term.
pub fn format_word_assignments(corpus: &Corpus, assignments: &[Vec<usize>]) -> Result<String> {
    if assignments.len() != corpus.num_docs() {
        return Err(LdaError::invalid("one assignment row per document is required"));
    }
    let mut out = String::new();
    for (doc, row) in corpus.docs.iter().zip(assignments) {
        if row.len() != doc.len() {
            return Err(LdaError::invalid("one topic per distinct term is required"));
        }
        push_padded(&mut out, doc.len(), 3, "document length");
        for (&w, &k) in doc.terms.iter().zip(row) {
            out.push(' ');
            push_padded(&mut out, w, 4, "word id");
            out.push(':');
            push_padded(&mut out, k, 2, "topic id");
        }
        out.push('\n');
    }
    Ok(out)
}

/// Reads word-assignment lines back into `(word, topic)` pairs.
pub fn parse_word_assignments(text: &str) -> Result<Vec<Vec<(usize, usize)>>> {
    text.lines()
        .enumerate()
        .map(|(i, line)| {
            let mut fields = line.split_whitespace();
            let n: usize = fields
                .next()
                .and_then(|f| f.parse().ok())
                .ok_or_else(|| LdaError::parse(i + 1, "missing term count"))?;
            let pairs = fields
                .map(|f| {
                    let (w, k) = f
                        .split_once(':')
                        .ok_or_else(|| LdaError::parse(i + 1, format!("expected word:topic, got {f:?}")))?;
                    match (w.parse(), k.parse()) {
                        (Ok(w), Ok(k)) => Ok((w, k)),
                        _ => Err(LdaError::parse(i + 1, format!("bad pair {f:?}"))),
                    }
                })
                .collect::<Result<Vec<_>>>()?;
            if pairs.len() != n {
                return Err(LdaError::parse(i + 1, format!("declared {n} terms, found {}", pairs.len())));
            }
            Ok(pairs)
        })
        .collect()
}

/// C `%.{prec}e`: at least two exponent digits with an explicit sign.
pub fn c_exp(x: f64, prec: usize) -> String {
    if x.is_nan() {
        return "nan".into();
    }
    if x.is_infinite() {
        return if x > 0.0 { "inf".into() } else { "-inf".into() };
    }
    let s = format!("{x:.prec$e}");
    let (mantissa, exp) = s.split_once('e').unwrap();
    let (sign, digits) = match exp.strip_prefix('-') {
        Some(d) => ('-', d),
        None => ('+', exp),
    };
    format!("{mantissa}e{sign}{digits:0>2}")
}

/// `"%10.10f\t%5.5e"` lines of `(likelihood, converged)`.
pub fn format_likelihood_trace(trace: &[(f64, f64)]) -> String {
    trace.iter().map(|&(l, c)| format_likelihood_line(l, c)).collect()
}

pub fn format_likelihood_line(likelihood: f64, converged: f64) -> String {
    format!("{likelihood:10.10}\t{:>5}\n", c_exp(converged, 5))
}

/// Reads likelihood lines; `inf`/`nan` are accepted in the second column.
pub fn parse_likelihood_trace(text: &str) -> Result<Vec<(f64, f64)>> {
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, line)| {
            let mut f = line.split_whitespace();
            let mut next = || -> Result<f64> {
                f.next()
                    .and_then(|x| x.parse().ok())
                    .ok_or_else(|| LdaError::parse(i + 1, "expected two numbers"))
            };
            Ok((next()?, next()?))
        })
        .collect()
}

/// One `"%5.5f"` line per document likelihood.
pub fn format_doc_likelihoods(lhood: &[f64]) -> String {
    lhood.iter().map(|l| format!("{l:5.5}\n")).collect()
}
