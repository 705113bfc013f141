use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("row {row}, column '{column}': {message}")]
    Parse {
        row: usize,
        column: String,
        message: String,
    },

    #[error("invalid schema: {0}")]
    Schema(String),

    #[error("schema mismatch: expected {expected} attribute values, found {found}")]
    SchemaMismatch { expected: usize, found: usize },

    #[error("no minority instances")]
    NoMinority,

    #[error("empty training set")]
    EmptyTraining,

    #[error("length mismatch: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error(
        "all {k} clusters exceed the imbalance threshold {threshold}; increase the number of clusters"
    )]
    IncreaseClusterCount { k: usize, threshold: f64 },

    #[error("model format: {0}")]
    Model(String),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }
}
