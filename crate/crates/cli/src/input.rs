use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use lda_core::corpus::{parse_line_corpus, parse_sparse_corpus, Corpus, Vocabulary};
use lda_core::model_io::{self, LoadedGibbs};

use crate::args::{CorpusFormat, DataArgs, GibbsModelArgs};

pub fn read_text(path: &Path) -> Result<String> {
    fs::read_to_string(path).with_context(|| format!("cannot read {}", path.display()))
}

pub fn write_text(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).with_context(|| format!("cannot write {}", path.display()))
}

pub fn required_data(data: &DataArgs) -> Result<&Path> {
    match &data.data {
        Some(p) => Ok(p),
        None => bail!("--data is required"),
    }
}

pub fn resolve_format(path: &Path, format: CorpusFormat) -> CorpusFormat {
    match format {
        CorpusFormat::Auto if path.extension().is_some_and(|e| e == "dat") => CorpusFormat::Sparse,
        CorpusFormat::Auto => CorpusFormat::Line,
        f => f,
    }
}

/// Vocabulary whose term for id `i` is the string `i`.
pub fn numeric_vocab(num_terms: usize) -> Vocabulary {
    Vocabulary::from_terms((0..num_terms).map(|i| i.to_string())).expect("distinct numeric terms")
}

/// Reads a corpus. Line-format terms are resolved against `vocab` (new terms
/// are appended past its end); sparse corpora get numeric terms when no
/// vocabulary is supplied.
pub fn load_corpus(path: &Path, format: CorpusFormat, vocab: Option<Vocabulary>) -> Result<(Corpus, Vocabulary)> {
    let text = read_text(path)?;
    let parsed = match resolve_format(path, format) {
        CorpusFormat::Sparse => parse_sparse_corpus(&text).map(|c| {
            let vocab = vocab.unwrap_or_else(|| numeric_vocab(c.num_terms));
            (c, vocab)
        }),
        _ => parse_line_corpus(&text, vocab),
    };
    let (corpus, vocab) = parsed.with_context(|| format!("cannot parse {}", path.display()))?;
    log::info!(
        "{}: {} documents, {} terms, {} tokens",
        path.display(),
        corpus.num_docs(),
        corpus.num_terms,
        corpus.total_tokens()
    );
    Ok((corpus, vocab))
}

/// Creates `dir` and checks that files can be written in it.
pub fn prepare_out_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).with_context(|| format!("cannot create output directory {}", dir.display()))?;
    let probe: PathBuf = dir.join(".lda-write-check");
    fs::write(&probe, b"").with_context(|| format!("output directory {} is not writable", dir.display()))?;
    fs::remove_file(&probe).ok();
    Ok(())
}

pub fn load_gibbs(args: &GibbsModelArgs) -> Result<LoadedGibbs> {
    model_io::load_gibbs_model(&args.model, &args.tag)
        .with_context(|| format!("cannot load model {} from {}", args.tag, args.model.display()))
}

/// Writes `text` to `out`, or stdout when no path is given.
pub fn emit(out: Option<&Path>, text: &str) -> Result<()> {
    match out {
        Some(p) => write_text(p, text),
        None => {
            use std::io::Write;
            let mut stdout = std::io::stdout().lock();
            stdout.write_all(text.as_bytes())?;
            stdout.flush()?;
            Ok(())
        }
    }
}
