use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("{path}: line {line}: {msg}")]
    Parse {
        path: PathBuf,
        line: usize,
        msg: String,
    },

    #[error("invalid record on {date}: {msg}")]
    Validation { date: String, msg: String },

    #[error("domain error: {0}")]
    Domain(String),

    #[error("{what}: need at least {needed}, got {got}")]
    Size {
        what: &'static str,
        needed: usize,
        got: usize,
    },

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("numerical failure at iteration {iteration}: {msg}")]
    Numerical { iteration: usize, msg: String },

    /// Every IRWLS weight is zero; the current iterate is already optimal for
    /// the reweighted problem.
    #[error("empty active set")]
    EmptyActiveSet,

    #[error("optimization failed: {0}")]
    Optimization(String),

    #[error("alignment error: {0}")]
    Alignment(String),

    #[error("invalid argument: {0}")]
    Argument(String),

    #[error("model format: {0}")]
    Format(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}
