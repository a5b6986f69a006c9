use std::path::PathBuf;

use thiserror::Error;

/// Errors raised anywhere in the toolkit.
#[derive(Debug, Error)]
pub enum Error {
    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("CSV error: {0}")]
    Csv(#[from] csv::Error),

    #[error("JSON error: {0}")]
    Json(#[from] serde_json::Error),

    #[error("row {row}: {message}")]
    Parse { row: usize, message: String },

    #[error("invalid dataset: {0}")]
    InvalidDataset(String),

    #[error("partition impossible: {0}")]
    Partition(String),

    #[error("invalid quasi-identifier set: {0}")]
    QuasiIdentifier(String),

    #[error("invalid model specification: {0}")]
    ModelSpec(String),

    #[error("training failed: {0}")]
    Training(String),

    #[error("schema mismatch: expected {expected} cells, got {actual}")]
    SchemaMismatch { expected: usize, actual: usize },

    #[error("federated configuration error: {0}")]
    Federated(String),

    #[error("attack error: {0}")]
    Attack(String),

    #[error("evaluation error: {0}")]
    Evaluation(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("unsupported model format: {0}")]
    Format(String),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
