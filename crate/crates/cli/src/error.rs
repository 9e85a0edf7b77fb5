use std::path::Path;

use ocp_core::OcpError;
use thiserror::Error;

/// Failure of a CLI command. Each variant maps to one process exit code.
#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("{0}")]
    Parse(String),
    #[error("{0}")]
    Io(String),
    #[error("{failed} of {total} checks failed")]
    VerifyFailed { failed: usize, total: usize },
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 1,
            CliError::Parse(_) => 2,
            CliError::Io(_) => 3,
            CliError::VerifyFailed { .. } => 4,
        }
    }

    pub fn usage(msg: impl Into<String>) -> Self {
        CliError::Usage(msg.into())
    }

    pub fn io(path: &Path, err: std::io::Error) -> Self {
        CliError::Io(format!("{}: {err}", path.display()))
    }
}

impl From<OcpError> for CliError {
    fn from(e: OcpError) -> Self {
        match e {
            OcpError::Io { .. } => CliError::Io(e.to_string()),
            OcpError::Csv { .. } | OcpError::InvalidScore(_) => CliError::Parse(e.to_string()),
            _ => CliError::Usage(e.to_string()),
        }
    }
}

impl From<csv::Error> for CliError {
    fn from(e: csv::Error) -> Self {
        CliError::Io(e.to_string())
    }
}

pub type CliResult<T> = Result<T, CliError>;
