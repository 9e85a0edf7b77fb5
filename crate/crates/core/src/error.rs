use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum OcpError {
    #[error("target miscoverage level must lie in (0, 1), got {0}")]
    InvalidAlpha(f64),

    #[error("invalid score {0}: scores must be finite and nonnegative")]
    InvalidScore(f64),

    #[error("invalid radius {0}: radii must be nonnegative or +inf")]
    InvalidRadius(f64),

    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("trace is empty")]
    EmptyTrace,

    #[error("round {round} has an infinite radius; {what} is undefined for degenerate sets")]
    InfiniteRadius { round: u64, what: &'static str },

    #[error("length mismatch: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },

    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}, row {row}: {message}")]
    Csv { path: PathBuf, row: usize, message: String },
}

impl OcpError {
    pub(crate) fn param(name: &'static str, reason: impl Into<String>) -> Self {
        OcpError::InvalidParameter {
            name,
            reason: reason.into(),
        }
    }
}

pub type Result<T, E = OcpError> = std::result::Result<T, E>;
