use std::path::PathBuf;

use thiserror::Error;

/// Errors surfaced by the condensation engine.
#[derive(Debug, Error)]
pub enum Error {
    #[error("{path}:{line}: {message}")]
    Parse {
        path: PathBuf,
        line: usize,
        message: String,
    },

    #[error("validation failed: {0}")]
    Validation(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("missing precomputed embedding for node {node} chunk {chunk}")]
    MissingEmbedding { node: u64, chunk: usize },

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("privacy contract violated: attempted to transmit {0}")]
    PrivacyViolation(String),

    #[error("invariant violated: {0}")]
    Invariant(String),

    #[error("shape mismatch in parameter group `{0}`")]
    ShapeMismatch(String),

    #[error("checkpoint does not match dataset: {0}")]
    CheckpointMismatch(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
