//! Error classification for the process exit contract:
//! 0 success, 1 usage/configuration/IO, 2 numerical failure.

use std::fmt;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExitCode {
    Success = 0,
    Usage = 1,
    Numerical = 2,
}

#[derive(Debug)]
pub enum CliError {
    /// Bad flags, unreadable/invalid config or input files.
    Usage(String),
    /// The computation itself failed (fit divergence, no interference, ...).
    Numerical(String),
}

impl CliError {
    pub fn usage(msg: impl fmt::Display) -> Self {
        CliError::Usage(msg.to_string())
    }

    pub fn numerical(msg: impl fmt::Display) -> Self {
        CliError::Numerical(msg.to_string())
    }

    pub fn exit_code(&self) -> ExitCode {
        match self {
            CliError::Usage(_) => ExitCode::Usage,
            CliError::Numerical(_) => ExitCode::Numerical,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Usage(m) | CliError::Numerical(m) => write!(f, "{m}"),
        }
    }
}

impl std::error::Error for CliError {}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Usage(format!("io error: {e}"))
    }
}

pub type Result<T> = std::result::Result<T, CliError>;
