//! Config-driven studies: identification trials, trajectory dimension
//! studies, patch-trimming comparisons and noise estimation, each writing
//! JSON/CSV results plus a plotting script.

mod config;
mod dimension;
mod noise;
mod report;
mod run;
mod trim;

pub use config::{
    CaslrSpec, ExperimentConfig, FeatureMode, FilterSpec, NoiseSpec, Placement, SensorSpec, TruthEquation, TruthTerm,
};
pub use dimension::{run_dimension_study, DimensionProblem, DimensionStudyConfig, DimensionStudyResult, ModeSweep, ModeSweepRow};
pub use noise::{run_noise_estimate, NoiseSource, NoiseStudyConfig, NoiseStudyResult};
pub use report::{Aggregate, ExperimentReport, TrialRecord};
pub use run::{run_experiment, solve_problem, RunOptions};
pub use trim::{run_trim_comparison, TrimComparison, TrimComparisonConfig, TrimRow};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum ExperimentError {
    #[error("invalid config field `{field}`: {message}")]
    Invalid { field: String, message: String },
    #[error("config parse error: {0}")]
    Parse(#[from] toml::de::Error),
    #[error("config serialization error: {0}")]
    Serialize(#[from] toml::ser::Error),
    #[error("{stage}: {message}")]
    Stage { stage: &'static str, message: String },
    #[error("thread pool: {0}")]
    Pool(String),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl ExperimentError {
    pub fn stage(stage: &'static str, e: impl std::fmt::Display) -> Self {
        ExperimentError::Stage { stage, message: e.to_string() }
    }
}

/// 64-bit FNV-1a, used to fingerprint configs in reports.
pub fn fnv1a64(bytes: &[u8]) -> u64 {
    let mut h: u64 = 0xcbf29ce484222325;
    for &b in bytes {
        h ^= b as u64;
        h = h.wrapping_mul(0x100000001b3);
    }
    h
}

pub(crate) fn pool(parallelism: Option<usize>) -> Result<rayon::ThreadPool, ExperimentError> {
    let mut b = rayon::ThreadPoolBuilder::new();
    if let Some(n) = parallelism {
        b = b.num_threads(n.max(1));
    }
    b.build().map_err(|e| ExperimentError::Pool(e.to_string()))
}
