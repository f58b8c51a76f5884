use std::io;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("corpus is empty after applying min_count={min_count}")]
    EmptyCorpus { min_count: usize },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("word '{0}' is not in the vocabulary")]
    OutOfVocabulary(String),

    #[error("eigendecomposition failed for matrix {hash}")]
    Eigen { hash: String },

    #[error("training diverged at epoch {epoch}: {diagnostics}")]
    Divergence { epoch: usize, diagnostics: String },

    #[error("degenerate input: {0}")]
    Degenerate(String),

    #[error("vocabulary mismatch: expected {expected}, found {found}")]
    VocabMismatch { expected: String, found: String },

    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error(transparent)]
    Io(#[from] io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
