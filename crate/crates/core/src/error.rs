use thiserror::Error;

use crate::grid::GridFunction;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("grid mismatch: {0}")]
    GridMismatch(String),

    #[error("root finder did not converge after {iterations} iterations (bracket [{lo}, {hi}])")]
    NonConvergence { iterations: usize, lo: f64, hi: f64 },

    #[error("unknown system `{0}`")]
    UnknownSystem(String),

    #[error("time step {dt} violates the stability bound {bound} ({detail})")]
    Cfl { dt: f64, bound: f64, detail: String },

    #[error("non-finite value at t = {t}")]
    NonFinite { t: f64, last_good: Box<GridFunction> },

    #[error("boundary contamination at t = {t}: sentinel cell of component {component} moved by {drift:e}")]
    Contaminated { t: f64, component: usize, drift: f64 },

    #[error("mollifier support ({support} cells) wider than the grid ({n} cells)")]
    MollifierTooWide { support: usize, n: usize },

    #[error("configuration error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// True for aborts caused by the numerics rather than by the inputs.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::NonFinite { .. } | Error::Cfl { .. } | Error::Contaminated { .. } | Error::NonConvergence { .. }
        )
    }
}
