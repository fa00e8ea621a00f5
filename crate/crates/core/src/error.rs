use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("label {label} out of range for {num_classes} classes")]
    LabelOutOfRange { label: usize, num_classes: usize },

    #[error("training diverged: non-finite loss at epoch {epoch}")]
    Diverged { epoch: usize },

    #[error("invalid model spec: {0}")]
    InvalidSpec(String),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("model specs differ")]
    SpecMismatch,

    #[error("empty input: {0}")]
    Empty(&'static str),

    #[error("requested {requested} items from a pool of {available}")]
    PoolTooSmall { requested: usize, available: usize },

    #[error("malformed probability vector at index {index}: {reason}")]
    MalformedProbabilities { index: usize, reason: String },

    #[error("correlation undefined for constant input")]
    ConstantInput,

    #[error("incomplete result grid: {}", .missing.join("; "))]
    IncompleteGrid { missing: Vec<String> },

    #[error("{path}:{line}: {message}")]
    Parse {
        path: PathBuf,
        line: usize,
        message: String,
    },

    #[error("label of unlabeled index {index} read before selection")]
    LabelLeak { index: usize },

    #[error("checkpoint: {0}")]
    Checkpoint(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
