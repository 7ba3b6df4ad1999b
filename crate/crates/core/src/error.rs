use std::io;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// The jump direction of a surface transition is undefined (zero momentum or zero coupling).
    #[error("degenerate jump: momentum {momentum} and coupling {coupling} give no defined direction")]
    DegenerateJump { momentum: f64, coupling: f64 },

    #[error("non-finite phase-space state after {steps} steps")]
    NonFiniteState { steps: usize },

    #[error("incomplete ensemble: {0}")]
    IncompleteEnsemble(String),

    #[error("trace {0:e} is below the normalization floor")]
    VanishingTrace(f64),

    #[error("insufficient data: {found} points after cut, need at least {needed}")]
    InsufficientData { found: usize, needed: usize },

    #[error("time grid is not uniform")]
    NonUniformGrid,

    #[error("{key} {reason}")]
    Config { key: String, reason: String },

    #[error("run failed: {0}")]
    RunFailed(String),

    #[error(transparent)]
    Io(#[from] io::Error),
}

impl Error {
    pub(crate) fn config(key: impl Into<String>, reason: impl Into<String>) -> Self {
        Error::Config {
            key: key.into(),
            reason: reason.into(),
        }
    }
}
