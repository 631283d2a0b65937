use std::path::PathBuf;

use thiserror::Error;

/// Errors produced anywhere in the library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    Argument(String),

    #[error("state out of range: {0}")]
    Range(String),

    #[error("computation failed: {0}")]
    Computation(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("resource budget exceeded: {needed} state updates requested, budget is {budget}")]
    Budget { needed: u64, budget: u64 },

    #[error("{path}:{line}: {message}")]
    Parse {
        path: PathBuf,
        line: usize,
        message: String,
    },

    #[error("{path}: header mismatch on `{field}`: file has {found}, expected {expected}")]
    Mismatch {
        path: PathBuf,
        field: String,
        found: String,
        expected: String,
    },

    #[error("diagnostic failed: {0}")]
    Diagnostic(String),

    #[error("instance {instance}: {source}")]
    Instance {
        instance: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn parse(path: impl Into<PathBuf>, line: usize, message: impl Into<String>) -> Self {
        Error::Parse {
            path: path.into(),
            line,
            message: message.into(),
        }
    }

    /// Strips any `Instance` wrapping and returns the innermost error.
    pub fn root(&self) -> &Error {
        match self {
            Error::Instance { source, .. } => source.root(),
            other => other,
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
