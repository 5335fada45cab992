use std::path::PathBuf;

/// Errors produced anywhere in the library.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("dimension error: {0}")]
    Dimension(String),

    #[error("decomposition failed: {0}")]
    Decomposition(String),

    #[error("validation error: {0}")]
    Validation(String),

    /// The system is singular at the requested regularization.
    #[error("rank deficient system: {0}; use ols_min_norm for rank-deficient least squares")]
    Rank(String),

    #[error("column {column} is (nearly) collinear with the remaining columns")]
    Collinearity { column: usize },

    #[error("column {column} has zero norm")]
    DegenerateColumn { column: usize },

    #[error("configuration error: {0}")]
    Config(String),

    #[error("unsupported: {0}")]
    Unsupported(String),

    #[error("worker {worker}: {source}")]
    Worker {
        worker: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}: {message}")]
    Format { path: PathBuf, message: String },
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn dim(msg: impl Into<String>) -> Self {
        Error::Dimension(msg.into())
    }

    pub(crate) fn config(msg: impl Into<String>) -> Self {
        Error::Config(msg.into())
    }

    pub(crate) fn in_worker(self, worker: usize) -> Self {
        Error::Worker {
            worker,
            source: Box::new(self),
        }
    }
}
