//! Fourier-domain identification of constant-coefficient equations from
//! two snapshots, and singular-value diagnostics of trajectories and
//! feature matrices.

mod conditioning;
mod fourier;
mod svd;

pub use conditioning::{feature_conditioning, FeatureConditioning};
pub use fourier::{identify_constant_coeff, required_modes, SpectralIdentification, SpectralOptions, DEFAULT_MODE_FLOOR};
pub use svd::{
    dominant_count, singular_values, snapshot_matrix, svd_dimension_report, svd_report_from_matrix, SvdReport, ThresholdMode,
};

use thiserror::Error;

use crate::features::FeatureError;

#[derive(Debug, Error)]
pub enum SpectralError {
    #[error("time window [{0}, {1}] contains no grid times")]
    EmptyWindow(f64, f64),
    #[error("field index {0} out of range")]
    UnknownField(usize),
    #[error("snapshots must be nonempty, 1D or 2D, and of equal shape")]
    ShapeMismatch,
    #[error("t2 - t1 must be positive and finite, got {0}")]
    BadInterval(f64),
    #[error("{got} usable modes, at least {needed} needed")]
    InsufficientModes { got: usize, needed: usize },
    #[error("mode {mode:?} has |u_hat| = {magnitude:e}, below the floor {floor:e}")]
    WeakMode { mode: [i64; 2], magnitude: f64, floor: f64 },
    #[error("mode {mode:?} is outside the resolved spectrum")]
    UnresolvedMode { mode: [i64; 2] },
    #[error("phase of mode {mode:?} is {arg}, too close to +-pi to unwrap; shorten t2 - t1")]
    PhaseAmbiguity { mode: [i64; 2], arg: f64 },
    #[error("the {system} Vandermonde matrix has rank {rank} < {needed}; the modes are degenerate")]
    DegenerateModes { system: &'static str, rank: usize, needed: usize },
    #[error("feature `{0}` is not a pure derivative")]
    NotDerivativeOnly(String),
    #[error(transparent)]
    Feature(#[from] FeatureError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}
