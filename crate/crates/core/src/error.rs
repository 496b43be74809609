use std::path::PathBuf;

use thiserror::Error;

use crate::model::ValidationReport;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("malformed annotation: {0}")]
    MalformedAnnotation(String),

    #[error("document failed validation:\n{0}")]
    Validation(ValidationReport),

    #[error("parse error at {path}: {message}")]
    Parse { path: String, message: String },

    #[error("embedding file: {0}")]
    Embedding(String),

    #[error("embedding attach: {0}")]
    Attach(String),

    #[error("lexicon {source_name}:{line}: {message}")]
    Lexicon {
        source_name: String,
        line: usize,
        message: String,
    },

    #[error("export: {0}")]
    Export(String),

    #[error("checkpoint: {0}")]
    Checkpoint(String),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("non-finite value: {0}")]
    NonFinite(String),

    #[error("training: {0}")]
    Training(String),

    #[error("missing embeddings for document {0}")]
    MissingEmbeddings(String),

    #[error("antecedent {antecedent} does not precede anaphor {anaphor}")]
    BadAntecedent { anaphor: usize, antecedent: usize },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
