//! Error type shared by every module of the crate.

use std::path::PathBuf;

/// Coarse classification used by front-ends to pick exit codes.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ErrorKind {
    /// Bad arguments, inconsistent shapes, invalid parameters.
    Usage,
    /// File system or format problems.
    Io,
    /// A covariance-like matrix lost positive-definiteness.
    Numerical,
}

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("empty cluster")]
    EmptyCluster,

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("cannot remove a point from empty statistics")]
    RemoveFromEmpty,

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("length mismatch: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },

    /// Cholesky failed on a matrix that should be positive-definite.
    #[error("numerically degenerate matrix (minimum eigenvalue {min_eigenvalue:e})")]
    Degenerate { min_eigenvalue: f64 },

    #[error("at point {index}: {source}")]
    AtPoint {
        index: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("on worker {worker}: {source}")]
    AtWorker {
        worker: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("at batch (worker {worker}, local cluster {local_label}): {source}")]
    AtBatch {
        worker: usize,
        local_label: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("at iteration {iteration}: {source}")]
    AtIteration {
        iteration: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("label map has no entry for (worker {worker}, local cluster {local_label})")]
    MissingLabel { worker: usize, local_label: usize },

    #[error("{path}: {message}")]
    Format { path: PathBuf, message: String },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("worker channel closed unexpectedly")]
    Disconnected,
}

impl Error {
    pub fn kind(&self) -> ErrorKind {
        match self {
            Error::Degenerate { .. } => ErrorKind::Numerical,
            Error::Format { .. } | Error::Io { .. } => ErrorKind::Io,
            Error::AtPoint { source, .. }
            | Error::AtWorker { source, .. }
            | Error::AtBatch { source, .. }
            | Error::AtIteration { source, .. } => source.kind(),
            _ => ErrorKind::Usage,
        }
    }

    pub(crate) fn at_point(self, index: usize) -> Self {
        Error::AtPoint {
            index,
            source: Box::new(self),
        }
    }

    pub(crate) fn at_worker(self, worker: usize) -> Self {
        Error::AtWorker {
            worker,
            source: Box::new(self),
        }
    }

    pub(crate) fn at_iteration(self, iteration: usize) -> Self {
        Error::AtIteration {
            iteration,
            source: Box::new(self),
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
