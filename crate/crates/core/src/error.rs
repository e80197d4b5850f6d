//! Error type shared across the library.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    #[error("parse error at row {row}: {msg}")]
    Parse { row: u64, msg: String },

    #[error("empty series")]
    EmptySeries,

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("zero variance: {0}")]
    ZeroVariance(String),

    #[error("length mismatch: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },

    #[error("no feasible segmentation: {0}")]
    Infeasible(String),

    #[error("optimizer did not converge: {0}")]
    NonConvergence(String),

    #[error("numerical overflow at step {at}")]
    Overflow { at: usize },

    #[error("model failed for seed {seed}: {msg}")]
    ModelFailure { seed: u64, msg: String },

    #[error("config error: {0}")]
    Config(String),

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidInput(msg.into())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
