use std::io;
use std::path::PathBuf;

use uot_core::UotError;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error(transparent)]
    Solver(#[from] UotError),
    #[error("{}: {source}", path.display())]
    Io { path: PathBuf, source: io::Error },
    #[error("{}: {msg}", path.display())]
    Format { path: PathBuf, msg: String },
}

impl CliError {
    pub fn config(msg: impl Into<String>) -> Self {
        CliError::Config(msg.into())
    }

    pub fn io(path: impl Into<PathBuf>, source: io::Error) -> Self {
        CliError::Io {
            path: path.into(),
            source,
        }
    }

    /// `1` for bad configuration or input, `2` for numerical and I/O failures.
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Config(_) => 1,
            CliError::Solver(e) if e.is_numerical() => 2,
            CliError::Solver(UotError::NotConverged { .. }) => 0,
            CliError::Solver(_) => 1,
            CliError::Io { .. } | CliError::Format { .. } => 2,
        }
    }
}

pub type CliResult<T> = Result<T, CliError>;
