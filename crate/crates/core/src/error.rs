use thiserror::Error;

use crate::modulus::ModulusReport;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid curve: {0}")]
    InvalidCurve(String),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("inconsistent lifting: the lifted curve moves by {moved:e} on a run where the image curve is stationary (segment {segment})")]
    InconsistentLifting { segment: usize, moved: f64 },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("precondition failed: {0}")]
    Precondition(String),

    #[error("unsupported mapping `{0}`: no explicit branch inverses")]
    UnsupportedMapping(String),

    #[error("mapping `{0}` does not declare all regularity attributes required for verification")]
    MissingAttributes(String),

    #[error("closed form not available for {0}")]
    NotAvailable(String),

    #[error("not applicable: {0}")]
    NotApplicable(String),

    #[error(
        "density is not admissible: curve {index} has line integral {integral} (< 1 - {tol:e})"
    )]
    Inadmissible {
        index: usize,
        integral: f64,
        tol: f64,
    },

    #[error("winding check failed for curve {index}: {reason}")]
    WindingFailed { index: usize, reason: String },

    #[error("solver did not converge after {} iterations (relative gap {:.3e})", .best.iterations, .best.relative_gap())]
    NotConverged { best: Box<ModulusReport> },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
