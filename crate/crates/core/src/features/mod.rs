//! Feature dictionaries, finite-difference derivatives and per-patch
//! regression systems.

mod dictionary;
mod fd;
mod source;
mod system;

pub use dictionary::{build_dictionary, multi_indices, Dictionary, DictionarySpec, Factor, FeatureDescriptor, MultiIndex};
pub use fd::{axis_stencil, fd_derivative, fornberg_weights, Stencil, SPACE_ACCURACY, TIME_ACCURACY};
pub use source::{exact_source_supported, DerivativeSource, ExactSource, FdCache};
pub use system::{assemble_patch_system, evaluate_features, PatchRegressionSystem};

use crate::solvers::SolveError;

#[derive(Debug, thiserror::Error)]
pub enum FeatureError {
    #[error("dictionary needs at least one field")]
    EmptyFields,
    #[error("invalid feature descriptor: {0}")]
    InvalidDescriptor(String),
    #[error("unknown field `{0}`")]
    UnknownField(String),
    #[error("`{0}` is not in the dictionary")]
    NotInDictionary(String),
    #[error("invalid derivative: {0}")]
    InvalidDerivative(String),
    #[error("stencil needs {needed} points but the axis has {points}")]
    StencilTooWide { points: usize, needed: usize },
    #[error("axis {0} out of range")]
    AxisOutOfRange(usize),
    #[error("field shape does not match the grid")]
    ShapeMismatch,
    #[error("non-finite value in {0}")]
    NonFinite(String),
    #[error("patch {0} has no points")]
    DegeneratePatch(usize),
    #[error(transparent)]
    Solve(#[from] SolveError),
}
