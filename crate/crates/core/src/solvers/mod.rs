//! Benchmark PDE solvers, initial-condition families, exact solutions and
//! noise corruption.

mod exact;
mod grid;
mod initial;
mod noise;
mod problem;
mod pseudo_spectral;
mod trajectory;

use thiserror::Error;

use crate::expr::ExprError;

pub use exact::{evaluate_exact, exact_jets, has_closed_form, time_integral, ExactSolution};
pub(crate) use exact::gauss_legendre;
pub use grid::{GridSpec, Node, SpaceTimeGrid};
pub use initial::{g_map, make_initial, random_fourier_coefficients, FourierTerm, InitialCondition, Profile, Sinusoid};
pub use noise::add_noise;
pub use problem::{Equation, EvolutionProblem, SolverOptions};
pub use pseudo_spectral::solve;
pub use trajectory::TrajectoryField;

pub use crate::expr::transition;

#[derive(Debug, Error)]
pub enum SolveError {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),
    #[error("invalid trajectory: {0}")]
    InvalidTrajectory(String),
    #[error("invalid problem: {0}")]
    InvalidProblem(String),
    #[error(
        "stability violation ({scheme}): dt/dt_stable = {ratio:.3e} needs {needed} substeps per step, limit is {limit}; refine the time grid or raise max_substeps"
    )]
    StabilityViolation { scheme: &'static str, ratio: f64, needed: usize, limit: usize },
    #[error("spectral scheme requires periodic axis {0}")]
    NonPeriodicAxis(usize),
    #[error("no closed-form solution: {0}")]
    NoClosedForm(String),
    #[error("unsupported: {0}")]
    Unsupported(String),
    #[error("noise percent must be >= 0, got {0}")]
    NegativeNoise(f64),
    #[error("solution blew up at t = {0}")]
    NonFinite(f64),
    #[error(transparent)]
    Expr(#[from] ExprError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
