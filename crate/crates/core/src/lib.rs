//! PDE identification from a single observed trajectory.
//!
//! The pipeline: [`solvers`] generate benchmark data, [`features`] turns a
//! trajectory into per-patch regression systems, [`patches`] samples and
//! trims sensor patches, [`caslr`] selects one global support by group
//! subspace pursuit and refits coefficients locally, and [`spectral`] holds
//! the Fourier-domain identification and singular-value diagnostics.
//! [`experiment`] wires everything into reproducible, config-driven studies.

pub mod expr;
pub mod jet;
pub mod solvers;
pub mod features;
pub mod patches;
pub mod caslr;
pub mod spectral;
pub mod experiment;
