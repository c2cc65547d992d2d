use std::path::PathBuf;

use thiserror::Error;

/// Failures of one invocation, each with its process exit code.
#[derive(Debug, Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(String),
    #[error("cannot parse {path}: {message}")]
    Parse { path: PathBuf, message: String },
    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("strict mode: {0}")]
    Strict(String),
    #[error(transparent)]
    Core(#[from] resonant_core::Error),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        use resonant_core::Error as E;
        match self {
            CliError::Config(_) | CliError::Parse { .. } => 2,
            CliError::Io { .. } => 3,
            CliError::Strict(_) => 4,
            // Numerical breakdowns are not the input's fault.
            CliError::Core(E::NormDrift { .. } | E::NonFiniteObjective { .. } | E::LabelAssignment(_)) => 1,
            CliError::Core(_) => 2,
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        CliError::Io {
            path: path.into(),
            source,
        }
    }
}

pub type CliResult<T> = Result<T, CliError>;
