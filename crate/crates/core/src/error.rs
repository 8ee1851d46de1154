use std::io;

use thiserror::Error;

pub type Result<T, E = LdaError> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum LdaError {
    #[error("empty corpus")]
    EmptyCorpus,

    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("degenerate distribution: {0}")]
    DegenerateDistribution(String),

    #[error("count tables inconsistent: {0}")]
    Inconsistent(String),

    #[error("term ids outside the vocabulary of size {vocab_size}: {ids:?}")]
    VocabularyMismatch { vocab_size: usize, ids: Vec<usize> },

    #[error("numeric failure: {0}")]
    Numeric(String),

    #[error("empty topic {0}: no sufficient-statistic mass")]
    EmptyTopic(usize),

    #[error("{0}")]
    Format(String),

    #[error(transparent)]
    Io(#[from] io::Error),
}

impl LdaError {
    pub(crate) fn parse(line: usize, message: impl Into<String>) -> Self {
        LdaError::Parse {
            line,
            message: message.into(),
        }
    }

    pub(crate) fn invalid(message: impl Into<String>) -> Self {
        LdaError::InvalidArgument(message.into())
    }
}
