use std::process::ExitCode;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("usage: {0}")]
    Usage(String),
    #[error("invalid configuration: {0}")]
    Validation(String),
    #[error("{0}")]
    Precondition(String),
    #[error("i/o error: {0}")]
    Io(String),
    #[error("{0}")]
    ChecksFailed(String),
}

impl CliError {
    pub fn exit_code(&self) -> ExitCode {
        match self {
            CliError::ChecksFailed(_) => ExitCode::from(1),
            CliError::Usage(_) | CliError::Validation(_) | CliError::Precondition(_) => {
                ExitCode::from(2)
            }
            CliError::Io(_) => ExitCode::from(3),
        }
    }
}

impl From<dirtymac::Error> for CliError {
    fn from(e: dirtymac::Error) -> Self {
        match e {
            dirtymac::Error::InvalidArgument(m) => CliError::Validation(m),
            other => CliError::Precondition(other.to_string()),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Io(e.to_string())
    }
}
