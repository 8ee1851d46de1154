//! Corpus ingestion: whitespace-tokenized lines, the sparse `L id:count`
//! format, and the `term id` word map.

use std::collections::HashMap;
use std::fmt::Write as _;
use std::io::{BufRead, Write};

use crate::error::{LdaError, Result};

/// Bijective map between term strings and dense ids `0..len`.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Vocabulary {
    term_to_id: HashMap<String, usize>,
    id_to_term: Vec<String>,
}

impl Vocabulary {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.id_to_term.len()
    }

    pub fn is_empty(&self) -> bool {
        self.id_to_term.is_empty()
    }

    pub fn id(&self, term: &str) -> Option<usize> {
        self.term_to_id.get(term).copied()
    }

    pub fn term(&self, id: usize) -> Option<&str> {
        self.id_to_term.get(id).map(String::as_str)
    }

    /// Returns the id of `term`, appending it if unseen.
    pub fn get_or_insert(&mut self, term: &str) -> usize {
        if let Some(&id) = self.term_to_id.get(term) {
            return id;
        }
        let id = self.id_to_term.len();
        self.id_to_term.push(term.to_owned());
        self.term_to_id.insert(term.to_owned(), id);
        id
    }

    /// Terms in id order.
    pub fn terms(&self) -> impl Iterator<Item = &str> {
        self.id_to_term.iter().map(String::as_str)
    }

    /// Builds a vocabulary from terms listed in id order.
    pub fn from_terms<I, S>(terms: I) -> Result<Self>
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        let mut vocab = Vocabulary::new();
        for term in terms {
            let term = term.into();
            if vocab.term_to_id.contains_key(&term) {
                return Err(LdaError::Format(format!("duplicate term {term:?}")));
            }
            vocab.get_or_insert(&term);
        }
        Ok(vocab)
    }
}

/// A bag-of-words document: unique term ids with their occurrence counts.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Document {
    pub terms: Vec<usize>,
    pub counts: Vec<u32>,
}

impl Document {
    /// Builds a document from `(term, count)` pairs. Terms must be unique and
    /// counts positive.
    pub fn from_pairs(pairs: impl IntoIterator<Item = (usize, u32)>) -> Result<Self> {
        let mut doc = Document::default();
        let mut seen = HashMap::new();
        for (term, count) in pairs {
            if count == 0 {
                return Err(LdaError::invalid(format!("term {term} has zero count")));
            }
            if seen.insert(term, ()).is_some() {
                return Err(LdaError::invalid(format!("term {term} listed twice")));
            }
            doc.terms.push(term);
            doc.counts.push(count);
        }
        Ok(doc)
    }

    /// Folds a token sequence into unique terms in first-seen order.
    pub fn from_tokens(tokens: impl IntoIterator<Item = usize>) -> Self {
        let mut doc = Document::default();
        let mut slot: HashMap<usize, usize> = HashMap::new();
        for t in tokens {
            match slot.get(&t) {
                Some(&i) => doc.counts[i] += 1,
                None => {
                    slot.insert(t, doc.terms.len());
                    doc.terms.push(t);
                    doc.counts.push(1);
                }
            }
        }
        doc
    }

    /// Number of unique terms.
    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    /// Token count `N_d`.
    pub fn total(&self) -> usize {
        self.counts.iter().map(|&c| c as usize).sum()
    }

    /// Token expansion: each term repeated `count` times, in term order.
    /// Topic assignments are indexed by position in this sequence.
    pub fn tokens(&self) -> impl Iterator<Item = usize> + '_ {
        self.terms
            .iter()
            .zip(&self.counts)
            .flat_map(|(&t, &c)| std::iter::repeat_n(t, c as usize))
    }

    pub fn pairs(&self) -> impl Iterator<Item = (usize, u32)> + '_ {
        self.terms.iter().copied().zip(self.counts.iter().copied())
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Corpus {
    pub docs: Vec<Document>,
    pub num_terms: usize,
}

impl Corpus {
    /// Builds a corpus, checking every term id against `num_terms`.
    pub fn new(docs: Vec<Document>, num_terms: usize) -> Result<Self> {
        let corpus = Corpus { docs, num_terms };
        corpus.check_vocabulary(num_terms)?;
        Ok(corpus)
    }

    pub fn num_docs(&self) -> usize {
        self.docs.len()
    }

    pub fn total_tokens(&self) -> usize {
        self.docs.iter().map(Document::total).sum()
    }

    pub fn max_doc_len(&self) -> usize {
        self.docs.iter().map(Document::len).max().unwrap_or(0)
    }

    /// Fails with the sorted list of term ids that are `>= vocab_size`.
    pub fn check_vocabulary(&self, vocab_size: usize) -> Result<()> {
        let mut bad: Vec<usize> = self
            .docs
            .iter()
            .flat_map(|d| d.terms.iter().copied())
            .filter(|&t| t >= vocab_size)
            .collect();
        if bad.is_empty() {
            return Ok(());
        }
        bad.sort_unstable();
        bad.dedup();
        Err(LdaError::VocabularyMismatch {
            vocab_size,
            ids: bad,
        })
    }
}

fn split_lines(text: &str) -> Vec<&str> {
    let mut lines: Vec<&str> = text
        .split('\n')
        .map(|l| l.strip_suffix('\r').unwrap_or(l))
        .collect();
    if lines.last() == Some(&"") {
        lines.pop();
    }
    lines
}

/// Parses one whitespace-tokenized document per line.
///
/// Terms are looked up in (and appended to) `vocab`, or a fresh vocabulary
/// when `None`. A blank line is an empty document. A leading line holding a
/// single integer equal to the number of remaining lines is taken as the
/// document-count header some tools emit.
pub fn parse_line_corpus(text: &str, vocab: Option<Vocabulary>) -> Result<(Corpus, Vocabulary)> {
    let mut vocab = vocab.unwrap_or_default();
    let mut lines = split_lines(text);
    if lines.iter().all(|l| l.trim().is_empty()) {
        return Err(LdaError::EmptyCorpus);
    }
    if let Some(first) = lines.first() {
        let mut it = first.split_whitespace();
        if let (Some(tok), None) = (it.next(), it.next()) {
            if tok.parse::<usize>().ok() == Some(lines.len() - 1) && lines.len() > 1 {
                lines.remove(0);
            }
        }
    }
    let docs = lines
        .iter()
        .map(|line| {
            let ids: Vec<usize> = line
                .split_whitespace()
                .map(|tok| vocab.get_or_insert(tok))
                .collect();
            Document::from_tokens(ids)
        })
        .collect();
    let corpus = Corpus {
        docs,
        num_terms: vocab.len(),
    };
    Ok((corpus, vocab))
}

/// Parses the sparse format: one document per line, `L id:count ... id:count`.
pub fn parse_sparse_corpus(text: &str) -> Result<Corpus> {
    let lines = split_lines(text);
    if lines.is_empty() {
        return Err(LdaError::EmptyCorpus);
    }
    let mut docs = Vec::with_capacity(lines.len());
    let mut num_terms = 0usize;
    for (i, line) in lines.iter().enumerate() {
        let lineno = i + 1;
        let mut fields = line.split_whitespace();
        let declared: usize = fields
            .next()
            .ok_or_else(|| LdaError::parse(lineno, "blank line"))?
            .parse()
            .map_err(|_| LdaError::parse(lineno, "leading term count is not a non-negative integer"))?;
        let mut pairs = Vec::with_capacity(declared);
        for field in fields {
            let (id, count) = field
                .split_once(':')
                .ok_or_else(|| LdaError::parse(lineno, format!("expected id:count, got {field:?}")))?;
            let id: usize = id
                .parse()
                .map_err(|_| LdaError::parse(lineno, format!("bad term id {id:?}")))?;
            let count: i64 = count
                .parse()
                .map_err(|_| LdaError::parse(lineno, format!("bad count {count:?}")))?;
            if count < 1 || count > u32::MAX as i64 {
                return Err(LdaError::parse(lineno, format!("count {count} for term {id} out of range")));
            }
            pairs.push((id, count as u32));
        }
        if pairs.len() != declared {
            let noun = if declared == 1 { "pair" } else { "pairs" };
            return Err(LdaError::parse(
                lineno,
                format!("declared {declared} {noun}, found {}", pairs.len()),
            ));
        }
        if let Some(max) = pairs.iter().map(|p| p.0).max() {
            num_terms = num_terms.max(max + 1);
        }
        docs.push(Document::from_pairs(pairs).map_err(|e| LdaError::parse(lineno, e.to_string()))?);
    }
    Ok(Corpus { docs, num_terms })
}

pub fn write_sparse_corpus(corpus: &Corpus) -> String {
    let mut out = String::new();
    for doc in &corpus.docs {
        let _ = write!(out, "{}", doc.len());
        for (t, c) in doc.pairs() {
            let _ = write!(out, " {t}:{c}");
        }
        out.push('\n');
    }
    out
}

/// Writes each document as its token expansion, one line per document.
pub fn write_line_corpus(corpus: &Corpus, vocab: &Vocabulary) -> Result<String> {
    corpus.check_vocabulary(vocab.len())?;
    let mut out = String::new();
    for doc in &corpus.docs {
        let line: Vec<&str> = doc.tokens().map(|t| vocab.term(t).unwrap_or_default()).collect();
        out.push_str(&line.join(" "));
        out.push('\n');
    }
    Ok(out)
}

/// Writes `term id` lines in id order.
pub fn write_wordmap<W: Write>(vocab: &Vocabulary, mut sink: W) -> Result<()> {
    for (id, term) in vocab.terms().enumerate() {
        writeln!(sink, "{term} {id}")?;
    }
    Ok(())
}

/// Reads `term<whitespace>id` lines. A leading line holding only an integer
/// (a term count) is accepted and checked. Ids must be exactly `0..n`.
pub fn read_wordmap<R: BufRead>(source: R) -> Result<Vocabulary> {
    let mut entries: Vec<(String, usize, usize)> = Vec::new();
    let mut header: Option<usize> = None;
    for (i, line) in source.lines().enumerate() {
        let line = line?;
        let lineno = i + 1;
        let fields: Vec<&str> = line.split_whitespace().collect();
        match fields.as_slice() {
            [] => continue,
            [n] if i == 0 => {
                header = Some(
                    n.parse()
                        .map_err(|_| LdaError::parse(lineno, "expected `term id`"))?,
                );
            }
            [term, id] => {
                let id = id
                    .parse()
                    .map_err(|_| LdaError::parse(lineno, format!("bad id {id:?}")))?;
                entries.push(((*term).to_owned(), id, lineno));
            }
            _ => return Err(LdaError::parse(lineno, "expected `term id`")),
        }
    }
    if let Some(n) = header {
        if n != entries.len() {
            return Err(LdaError::Format(format!(
                "wordmap header declares {n} terms, found {}",
                entries.len()
            )));
        }
    }
    let mut slots: Vec<Option<String>> = vec![None; entries.len()];
    let mut seen: HashMap<&str, usize> = HashMap::new();
    for (term, id, lineno) in &entries {
        if seen.insert(term.as_str(), *id).is_some() {
            return Err(LdaError::parse(*lineno, format!("duplicate term {term:?}")));
        }
        let slot = slots
            .get_mut(*id)
            .ok_or_else(|| LdaError::parse(*lineno, format!("id {id} leaves a gap in 0..{}", entries.len())))?;
        if slot.is_some() {
            return Err(LdaError::parse(*lineno, format!("duplicate id {id}")));
        }
        *slot = Some(term.clone());
    }
    Vocabulary::from_terms(slots.into_iter().map(|s| s.expect("ids are dense")))
}
