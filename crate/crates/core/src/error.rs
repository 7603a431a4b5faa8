use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = SdfError> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum SdfError {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("mesh is not watertight; signs are unreliable (use unsigned mode to force)")]
    SignUnreliable,

    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },

    #[error("activation tape is stale (tape revision {tape}, network revision {network})")]
    StaleTape { tape: u64, network: u64 },

    #[error("network growth: {0}")]
    Growth(String),

    #[error("unknown shape id `{0}`")]
    UnknownShape(String),

    #[error("parse error at byte {offset}: {message}")]
    Parse { offset: u64, message: String },

    #[error("{path}: {message}")]
    File { path: PathBuf, message: String },

    #[error("unsupported checkpoint version {found} (expected {expected})")]
    CheckpointVersion { found: u32, expected: u32 },

    #[error("schedule: {0}")]
    Schedule(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl SdfError {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        SdfError::InvalidInput(msg.into())
    }

    pub(crate) fn parse(offset: u64, msg: impl Into<String>) -> Self {
        SdfError::Parse {
            offset,
            message: msg.into(),
        }
    }
}
