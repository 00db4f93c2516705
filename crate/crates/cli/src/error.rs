use std::io;
use std::path::PathBuf;

use diner::DinerError;
use thiserror::Error;

pub type Result<T, E = CliError> = std::result::Result<T, E>;

/// Failure classes, each with its own process exit code.
#[derive(Debug, Error)]
pub enum CliError {
    #[error("configuration error: {0}")]
    Config(String),

    #[error("data error: {0}")]
    Data(String),

    #[error("{0}")]
    Divergence(DinerError),

    #[error("disorder invariance violated: {0}")]
    Disorder(String),

    #[error("cannot write {path}: {source}")]
    Output { path: PathBuf, source: io::Error },

    #[error(transparent)]
    Core(DinerError),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Data(_) => 3,
            CliError::Divergence(_) => 4,
            CliError::Disorder(_) => 5,
            CliError::Output { .. } | CliError::Core(_) => 1,
        }
    }

    /// Wraps a failure to read or decode user data.
    pub fn data(context: impl std::fmt::Display, err: impl std::fmt::Display) -> Self {
        CliError::Data(format!("{context}: {err}"))
    }
}

impl From<DinerError> for CliError {
    fn from(e: DinerError) -> Self {
        match e {
            DinerError::Divergence { .. } => CliError::Divergence(e),
            DinerError::Validation(m) => CliError::Config(m),
            DinerError::Binding { .. } | DinerError::EmptySignal | DinerError::Format { .. } => CliError::Data(e.to_string()),
            other => CliError::Core(other),
        }
    }
}
