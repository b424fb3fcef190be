use std::io;
use std::path::PathBuf;

use thiserror::Error;

use crate::logic::ParseError;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("{}: {source}", path.display())]
    Io { path: PathBuf, source: io::Error },

    #[error("vocabulary is empty")]
    EmptyVocabulary,

    #[error("duplicate token `{token}` at line {line}")]
    DuplicateToken { line: usize, token: String },

    #[error("out-of-vocabulary tokens: {}", .0.join(", "))]
    OutOfVocabulary(Vec<String>),

    #[error("the mask placeholder is not a legal sentence token")]
    MaskToken,

    #[error("sentence length {len} outside [1, {max_len}]")]
    SentenceLength { len: usize, max_len: usize },

    #[error("word `{word}` claimed by both [{first}] and [{second}]")]
    CategoryConflict { word: String, first: String, second: String },

    #[error("unknown category [{0}]")]
    UnknownCategory(String),

    #[error("invalid category spec: {0}")]
    CategorySpec(String),

    #[error(transparent)]
    Formula(#[from] ParseError),

    #[error("beta must lie strictly inside (0, 1), got {0}")]
    InvalidBeta(f64),

    #[error("config error: {0}")]
    Config(String),

    #[error("language model error: {0}")]
    Backend(String),

    #[error("model file error: {0}")]
    ModelFormat(String),

    #[error("corpus is empty")]
    EmptyCorpus,

    #[error("{0}")]
    Invalid(String),
}

/// Coarse failure class, used by the CLI to pick an exit code.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorClass {
    Config,
    Backend,
    Other,
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub fn class(&self) -> ErrorClass {
        match self {
            Error::Backend(_) | Error::ModelFormat(_) => ErrorClass::Backend,
            Error::Io { .. } | Error::Invalid(_) => ErrorClass::Other,
            _ => ErrorClass::Config,
        }
    }
}
