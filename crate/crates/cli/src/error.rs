use spatspec_core::Error;
use std::fmt;

/// A command failure with its exit code.
#[derive(Debug)]
pub enum CliError {
    /// Bad configuration or input data; exit code 2.
    Config(String),
    /// A numerical routine failed; exit code 3.
    Numerical(String),
}

pub type CliResult<T> = std::result::Result<T, CliError>;

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            Self::Config(_) => 2,
            Self::Numerical(_) => 3,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Config(m) => write!(f, "configuration error: {m}"),
            Self::Numerical(m) => write!(f, "numerical failure: {m}"),
        }
    }
}

impl std::error::Error for CliError {}

pub fn config_err(msg: impl Into<String>) -> CliError {
    CliError::Config(msg.into())
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        match e {
            Error::InvalidInput(_)
            | Error::NoNyquistBox
            | Error::EmptyRegion
            | Error::NoGridNodes
            | Error::SchemeMismatch
            | Error::TaperIndexMismatch { .. }
            | Error::NoTapers
            | Error::GridMismatch
            | Error::InsufficientCoverage { .. } => Self::Config(e.to_string()),
            _ => Self::Numerical(e.to_string()),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        Self::Config(e.to_string())
    }
}

impl From<csv::Error> for CliError {
    fn from(e: csv::Error) -> Self {
        Self::Config(e.to_string())
    }
}

impl From<serde_json::Error> for CliError {
    fn from(e: serde_json::Error) -> Self {
        Self::Config(e.to_string())
    }
}
