use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("shape mismatch: {0}")]
    Shape(String),

    /// Non-finite input or a failed decomposition.
    #[error("numerical error: {0}")]
    Numerical(String),

    /// Every pairwise distance in a view is zero, so no kernel bandwidth exists.
    #[error("degenerate kernel scale: all points in the view are identical")]
    DegenerateScale,

    #[error("no convergence after {iterations} iterations (last residual {residual:e})")]
    Convergence { iterations: usize, residual: f64 },

    #[error("degenerate distribution: {0}")]
    DegenerateDistribution(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("schema error: {0}")]
    Schema(String),

    #[error("{path}: parse error at row {row}, column {col}: {msg}")]
    Parse {
        path: PathBuf,
        row: usize,
        col: usize,
        msg: String,
    },

    #[error("{path}: {source}")]
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
}
