use std::fmt::Write;

use anyhow::{bail, Context, Result};
use lda_core::analytics::{self, RankWeights, RankedList};
use lda_core::corpus::{write_line_corpus, write_sparse_corpus, Vocabulary};
use lda_core::gibbs;

use crate::args::{
    ConvertArgs, CorpusFormat, DocQualityArgs, SimilarArgs, TagsArgs, TopicRankArgs, WordRankArgs,
};
use crate::input::{emit, load_corpus, load_gibbs, read_text, required_data, resolve_format, write_text};

fn term(vocab: &Vocabulary, id: usize) -> &str {
    vocab.term(id).unwrap_or("?")
}

fn finish(mut list: RankedList, top_n: Option<usize>) -> RankedList {
    if let Some(n) = top_n {
        list.truncate(n);
    }
    list
}

pub fn similar(args: &SimilarArgs) -> Result<()> {
    let m = load_gibbs(&args.model)?;
    let theta = gibbs::estimate_theta(&m.state);
    let list = analytics::similar_docs(&theta, args.doc, args.top_n, args.metric)?;
    emit(args.report.out.as_deref(), &list.to_tsv())
}

pub fn tags(args: &TagsArgs) -> Result<()> {
    let m = load_gibbs(&args.model)?;
    let model = gibbs::TopicModel::from_state(&m.state);
    if args.doc >= model.theta.rows() {
        bail!("document {} out of range ({} documents)", args.doc, model.theta.rows());
    }
    let tags = analytics::auto_tags(model.theta.row(args.doc), &model.phi, args.top_n)?;
    let mut out = String::new();
    for (w, p) in tags {
        let _ = writeln!(out, "{w}\t{}\t{p:.6}", term(&m.vocab, w));
    }
    emit(args.report.out.as_deref(), &out)
}

fn parse_weights(text: &str) -> Result<RankWeights> {
    let parse = |s: &str| s.trim().parse::<f64>().with_context(|| format!("bad weight {s:?}"));
    match text.split_once(',') {
        Some((a, b)) => Ok(RankWeights {
            doc: parse(a)?,
            word: parse(b)?,
        }),
        None => bail!("--weights expects `a,b`, got {text:?}"),
    }
}

pub fn topic_rank(args: &TopicRankArgs) -> Result<()> {
    let weights = parse_weights(&args.weights)?;
    let m = load_gibbs(&args.model)?;
    let list = analytics::topic_rank(&m.state, weights, args.metric)?;
    emit(args.report.out.as_deref(), &finish(list, args.top_n).to_tsv())
}

pub fn word_rank(args: &WordRankArgs) -> Result<()> {
    let m = load_gibbs(&args.model)?;
    let list = finish(analytics::word_rank(&m.state, args.metric)?, args.top_n);
    let mut out = String::new();
    for &(w, s) in &list.items {
        let _ = writeln!(out, "{w}\t{}\t{s:.6}", term(&m.vocab, w));
    }
    emit(args.report.out.as_deref(), &out)
}

pub fn doc_quality(args: &DocQualityArgs) -> Result<()> {
    let m = load_gibbs(&args.model)?;
    let model = gibbs::TopicModel::from_state(&m.state);
    let list = analytics::doc_quality(&m.state, &model.theta, &model.phi, &m.corpus)?;
    emit(args.report.out.as_deref(), &finish(list, args.top_n).to_tsv())
}

pub fn convert(args: &ConvertArgs) -> Result<()> {
    let data = required_data(&args.data)?;
    let from = resolve_format(data, args.data.format);
    let to = resolve_format(&args.out, args.to);
    let vocab = match (from, &args.wordmap) {
        (CorpusFormat::Sparse, Some(p)) => Some(
            lda_core::corpus::read_wordmap(read_text(p)?.as_bytes())
                .with_context(|| format!("cannot parse {}", p.display()))?,
        ),
        _ => None,
    };
    let (corpus, vocab) = load_corpus(data, from, vocab)?;
    let text = match to {
        CorpusFormat::Sparse => {
            if let Some(p) = &args.wordmap {
                let mut buf = Vec::new();
                lda_core::corpus::write_wordmap(&vocab, &mut buf)?;
                std::fs::write(p, buf).with_context(|| format!("cannot write {}", p.display()))?;
            }
            write_sparse_corpus(&corpus)
        }
        _ => write_line_corpus(&corpus, &vocab)?,
    };
    write_text(&args.out, &text)
}
