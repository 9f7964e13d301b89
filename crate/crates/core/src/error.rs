use std::time::Duration;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("power iteration did not converge after {iterations} iterations (residual {residual:e})")]
    NoConvergence { iterations: usize, residual: f64 },

    #[error("mixing bound not reached within {max_k} steps (total variation {distance})")]
    MixingNotReached { max_k: usize, distance: f64 },

    #[error("degenerate input: {0}")]
    Degenerate(String),

    #[error("simulation diverged at t={t} (|y| = {value:e})")]
    Unstable { t: usize, value: f64 },

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("replication exceeded its {0:?} budget")]
    Timeout(Duration),

    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub fn arg(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }

    pub(crate) fn parse(line: usize, msg: impl Into<String>) -> Self {
        Error::Parse { line, msg: msg.into() }
    }

    /// True for failures that come from the numerics rather than from the
    /// caller's inputs or the filesystem.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::NoConvergence { .. }
                | Error::MixingNotReached { .. }
                | Error::Degenerate(_)
                | Error::Unstable { .. }
                | Error::Numerical(_)
                | Error::Timeout(_)
        )
    }
}
