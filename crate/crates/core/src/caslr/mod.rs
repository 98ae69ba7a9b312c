//! Consistent and sparse local regression: one global support chosen by
//! group subspace pursuit, coefficients fitted patch by patch.

mod lstsq;
mod metrics;
mod pursuit;
mod report;
mod sweep;

pub use lstsq::{lstsq, LstsqSolution, QR_PIVOT_TOLERANCE, SVD_RCOND};
pub use metrics::{coefficient_error, jaccard, jaccard_system, reconstruct_coefficients, CoefficientError, PatchCoefficients};
pub use pursuit::{group_subspace_pursuit, Pursuit, PursuitResult, MAX_ITERATIONS};
pub use report::IdentificationReport;
pub use sweep::{model_score, sweep_and_score, IdentificationResult, LevelTrace, RhoRule};

#[derive(Debug, thiserror::Error)]
pub enum CaslrError {
    #[error("no patch systems")]
    NoSystems,
    #[error("sparsity level {l} outside 1..{k}")]
    LevelOutOfRange { l: usize, k: usize },
    #[error("patch {patch} has {got} features, expected {expected}")]
    DimensionMismatch { patch: usize, expected: usize, got: usize },
    #[error("patch {0} has an empty system")]
    EmptySystem(usize),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
