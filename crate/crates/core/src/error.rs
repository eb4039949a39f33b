use std::path::PathBuf;

use crate::solvers::SolveResult;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    /// An argument is outside the operation's domain (bad dimension, empty batch, ...).
    #[error("domain error: {0}")]
    Domain(String),

    /// A computation produced a non-finite value.
    #[error("numeric error: {0}")]
    Numeric(String),

    /// A parameter combination makes a formula meaningless.
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    /// A solver produced a non-finite iterate. Carries everything recorded up to
    /// the last finite iterate.
    #[error("solver diverged at epoch {epoch}, inner iteration {inner_iter}")]
    Diverged {
        epoch: usize,
        inner_iter: usize,
        partial: Box<SolveResult>,
    },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}

pub(crate) fn domain<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::Domain(msg.into()))
}
