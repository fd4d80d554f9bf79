//! Error type shared by every module in the crate.

use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid vocabulary: {0}")]
    InvalidVocabulary(String),

    #[error("duplicate token {token:?} (line {line})")]
    DuplicateVocabLine { token: String, line: usize },

    #[error("token id {id} out of range at position {position} (vocabulary size {vocab_size})")]
    TokenIdOutOfRange {
        id: u32,
        position: usize,
        vocab_size: usize,
    },

    #[error("token {token:?} already present in the base vocabulary")]
    TokenOverlap { token: String },

    #[error("duplicate token {token:?} in the new-token list")]
    DuplicateNewToken { token: String },

    #[error("empty word frequency table")]
    EmptyFrequencyTable,

    #[error("embedding matrix has no rows; mean is undefined")]
    EmptyEmbeddingMatrix,

    #[error("{0} rows excluded from the mean; none remain")]
    AllRowsExcluded(usize),

    #[error("models are not a base/extension pair: {0}")]
    NotAnExtension(String),

    #[error("vocabulary has no non-special tokens; random-replacement pool is empty")]
    EmptyReplacementPool,

    #[error("invalid masking config: {0}")]
    InvalidMaskingConfig(String),

    #[error("invalid lexicon (line {line}): {reason}")]
    InvalidLexicon { line: usize, reason: String },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("length mismatch: gold has {gold} labels, pred has {pred}")]
    LengthMismatch { gold: usize, pred: usize },

    #[error("length mismatch in sequence pair {index}: gold {gold} tags, pred {pred} tags")]
    PairLengthMismatch {
        index: usize,
        gold: usize,
        pred: usize,
    },

    #[error("invalid BIO tag {tag:?} at position {position}")]
    InvalidBioTag { tag: String, position: usize },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{what}: {reason}")]
    Format { what: String, reason: String },
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub fn format(what: impl Into<String>, reason: impl Into<String>) -> Self {
        Error::Format {
            what: what.into(),
            reason: reason.into(),
        }
    }
}
