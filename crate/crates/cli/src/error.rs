use thiserror::Error;

/// Failures of a command, grouped by exit code.
#[derive(Debug, Error)]
pub enum CliError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("numerical failure: {0}")]
    Numeric(String),
    #[error("I/O error: {0}")]
    Io(String),
}

impl CliError {
    /// 1 for configuration errors, 2 for numerical failures, 3 for I/O.
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Config(_) => 1,
            CliError::Numeric(_) => 2,
            CliError::Io(_) => 3,
        }
    }
}

impl From<cauchy_core::Error> for CliError {
    fn from(e: cauchy_core::Error) -> Self {
        match e {
            cauchy_core::Error::Io(io) => CliError::Io(io.to_string()),
            cauchy_core::Error::Numeric(msg) => CliError::Numeric(msg),
            other => CliError::Numeric(other.to_string()),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Io(e.to_string())
    }
}
