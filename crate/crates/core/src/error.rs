use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("configuration error: {0}")]
    Config(String),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("shape mismatch: expected {expected}, got {got}")]
    Shape { expected: usize, got: usize },

    #[error("{n_ues} UEs exceed the surrogate capacity of {capacity}")]
    Capacity { n_ues: usize, capacity: usize },

    #[error("exhaustive search over {size} assignments exceeds budget {budget}")]
    Budget { size: f64, budget: u64 },

    #[error("model is not trained")]
    Untrained,

    #[error("dataset is empty")]
    EmptyDataset,

    #[error("config hash mismatch: {what} has {found}, expected {expected}")]
    HashMismatch { what: String, expected: String, found: String },

    #[error("parse error: {0}")]
    Parse(String),

    #[error("{path}: {source}")]
    File {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub fn file(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::File { path: path.into(), source }
    }

    /// True for errors caused by bad user input (config, hashes, capacity limits).
    pub fn is_config(&self) -> bool {
        matches!(self, Error::Config(_) | Error::HashMismatch { .. } | Error::Capacity { .. } | Error::Budget { .. })
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
