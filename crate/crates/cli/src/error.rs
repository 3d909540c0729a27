use std::process::ExitCode;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(String),
    #[error("numeric failure: {0}")]
    Numeric(#[from] superres::Error),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("validation failed: {0}")]
    Validation(String),
}

impl CliError {
    pub fn exit_code(&self) -> ExitCode {
        match self {
            CliError::Config(_) | CliError::Io(_) => ExitCode::from(1),
            CliError::Numeric(_) => ExitCode::from(2),
            CliError::Validation(_) => ExitCode::from(3),
        }
    }
}

/// Splits core errors into bad input (config) and numeric failures.
pub fn classify(e: superres::Error) -> CliError {
    match e {
        superres::Error::Domain(m) => CliError::Config(m),
        superres::Error::DimensionMismatch { .. } => CliError::Config(e.to_string()),
        other => CliError::Numeric(other),
    }
}
