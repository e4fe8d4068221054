use std::path::PathBuf;

use thiserror::Error;

/// Errors raised by the library.
///
/// Variants split into two families: validation failures (bad configuration,
/// violated preconditions, malformed inputs) and internal failures (I/O). The
/// CLI maps the first family to exit code 1 and the second to exit code 2.
#[derive(Debug, Error)]
pub enum Error {
    #[error("configuration error: {0}")]
    Config(String),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    Dimension { expected: usize, got: usize },

    #[error("empty dataset")]
    EmptyDataset,

    #[error("index {index} out of range for dataset of size {n}")]
    IndexOutOfRange { index: usize, n: usize },

    #[error("no unique minimizer: {0}")]
    NoUniqueMinimizer(String),

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("missing data: {0}")]
    MissingData(String),

    #[error("cannot read {path}: {source}")]
    Read {
        path: PathBuf,
        source: std::io::Error,
    },

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

impl Error {
    /// True for user-facing validation failures, false for internal errors.
    pub fn is_validation(&self) -> bool {
        !matches!(self, Error::Io(_))
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
