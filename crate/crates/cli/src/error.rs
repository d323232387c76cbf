use std::process::ExitCode;

use thiserror::Error;

/// Failures grouped by the exit code scripts can rely on.
#[derive(Debug, Error)]
pub enum CliError {
    /// Malformed architecture strings or input files.
    #[error("parse error: {0}")]
    Parse(String),
    #[error("config error: {0}")]
    Config(String),
    #[error("runtime error: {0}")]
    Runtime(String),
    /// A run directory lacks a file the command needs.
    #[error("missing artifact: {0}")]
    Missing(String),
}

impl CliError {
    pub fn exit_code(&self) -> ExitCode {
        ExitCode::from(match self {
            CliError::Parse(_) => 2,
            CliError::Config(_) => 3,
            CliError::Runtime(_) => 4,
            CliError::Missing(_) => 5,
        })
    }
}

pub fn runtime(e: impl std::fmt::Display) -> CliError {
    CliError::Runtime(e.to_string())
}
