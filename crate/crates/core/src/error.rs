use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("failed to read {path}: {source}")]
    Read {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("failed to write {path}: {source}")]
    Write {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}:{line}: {message}")]
    Parse { path: PathBuf, line: usize, message: String },

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("label {label} has no seed words occurring in the corpus")]
    EmptySeedLabel { label: usize },

    #[error("checkpoint error: {0}")]
    Checkpoint(String),

    #[error("non-finite value in {quantity} at iteration {iteration}")]
    NonFinite { quantity: String, iteration: usize },
}

impl Error {
    /// Process exit code for the command-line front end.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Read { .. }
            | Error::Parse { .. }
            | Error::InvalidInput(_)
            | Error::Config(_)
            | Error::EmptySeedLabel { .. } => 2,
            Error::Checkpoint(_) => 3,
            Error::Write { .. } | Error::NonFinite { .. } => 1,
        }
    }
}
