use std::path::{Path, PathBuf};

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error(
        "materialized operator needs {required} bytes per worker, budget is {budget}; use separable mode"
    )]
    MemoryBudget { required: u64, budget: u64 },

    #[error("conjugate gradient diverged: residual norm is not finite ({0})")]
    Divergence(String),

    #[error("collective failure: {0}")]
    Collective(String),

    #[error("worker {worker} failed: {source}")]
    Worker {
        worker: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("tensor file: {0}")]
    Format(String),

    #[error("{}: {err}", path.display())]
    File { path: PathBuf, err: std::io::Error },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub(crate) fn shape_err(msg: impl Into<String>) -> Error {
    Error::Shape(msg.into())
}

/// Attaches `path` to an I/O error.
pub fn file_err(path: &Path) -> impl FnOnce(std::io::Error) -> Error + '_ {
    move |err| Error::File {
        path: path.to_path_buf(),
        err,
    }
}
