use std::path::PathBuf;

use thiserror::Error;

/// Broad failure category, used by the CLI to pick an exit code.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorKind {
    /// Bad configuration value supplied by the caller.
    Config,
    /// Malformed or inconsistent input data.
    Data,
    /// The optimizer could not make progress.
    Numerical,
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("dimension mismatch: {what} (expected {expected}, found {found})")]
    DimensionMismatch {
        what: &'static str,
        expected: usize,
        found: usize,
    },

    #[error("non-finite value {value} in {what} at {index}")]
    NonFinite {
        what: &'static str,
        index: String,
        value: f64,
    },

    #[error("label column {column} is not one-hot")]
    NotOneHot { column: usize },

    #[error("invalid weights: {0}")]
    InvalidWeights(String),

    #[error("empty dataset")]
    EmptyDataset,

    #[error("csv parse error at row {row}, column {column}: {message}")]
    Csv {
        row: usize,
        column: usize,
        message: String,
    },

    #[error("format error at line {line}: {message}")]
    Format { line: usize, message: String },

    #[error("split leaves an empty side (n = {n}, test = {test})")]
    EmptySplit { n: usize, test: usize },

    #[error("degenerate retraction: zero-norm step at iteration {iteration}")]
    DegenerateRetraction { iteration: usize },

    #[error("objective diverged at iteration {iteration} (value {value})")]
    Diverged { iteration: usize, value: f64 },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub fn kind(&self) -> ErrorKind {
        match self {
            Error::Config(_) => ErrorKind::Config,
            Error::DegenerateRetraction { .. } | Error::Diverged { .. } => ErrorKind::Numerical,
            _ => ErrorKind::Data,
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
