//! Error types shared across the crate.

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("measurement record regime mismatch: expected {expected}, got {got}")]
    RegimeMismatch { expected: String, got: String },

    #[error("grid too coarse: {points_under_lobe} points under the main lobe (need >= 8)")]
    Resolution { points_under_lobe: usize },

    #[error("fit failed to converge: residual {residual}")]
    FitDivergence { residual: f64 },

    #[error("singular pulse configuration: {0}")]
    SingularConfiguration(String),

    #[error("spectral aliasing: {0}")]
    Aliasing(String),

    #[error("no lock-in point found: {0}")]
    NoLock(String),

    #[error("numerical integration failed: {0}")]
    IntegrationFailure(String),
}
