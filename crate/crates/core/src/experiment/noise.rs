use std::io::Write;
use std::path::{Path, PathBuf};

use ndarray::ArrayD;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{pool, solve_problem, ExperimentError};
use crate::patches::{estimate_noise_variance, lipschitz_estimate, noise_patches, NoiseEstimate};
use crate::solvers::{add_noise, EvolutionProblem, SpaceTimeGrid, TrajectoryField};

/// What the noisy data are drawn from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum NoiseSource {
    /// `value` everywhere plus Gaussian noise of standard deviation `sigma`.
    Constant { value: f64, sigma: f64, grid: SpaceTimeGrid },
    /// A solved problem with noise added as a percentage of each field's spread.
    Problem {
        problem: EvolutionProblem,
        percent: f64,
        #[serde(default)]
        downsample: Option<[usize; 2]>,
    },
}

/// Monte-Carlo study of the noise-variance estimator.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NoiseStudyConfig {
    pub name: String,
    pub source: NoiseSource,
    #[serde(default)]
    pub field: usize,
    /// Number of disjoint boxes `N`.
    pub patches: usize,
    pub radius: usize,
    pub time_radius: usize,
    pub repetitions: usize,
    /// Repetition `i` draws its noise from `seed + i`.
    #[serde(default)]
    pub seed: u64,
    /// Lipschitz constant for the bounds. Defaults to zero for a constant
    /// field and to the clean trajectory's gradient estimate otherwise.
    #[serde(default)]
    pub lipschitz: Option<f64>,
    #[serde(default)]
    pub output_dir: Option<PathBuf>,
}

impl NoiseStudyConfig {
    pub fn from_toml_str(src: &str) -> Result<Self, ExperimentError> {
        let c: NoiseStudyConfig = toml::from_str(src)?;
        c.validate()?;
        Ok(c)
    }

    pub fn load(path: &Path) -> Result<Self, ExperimentError> {
        Self::from_toml_str(&std::fs::read_to_string(path)?)
    }

    pub fn validate(&self) -> Result<(), ExperimentError> {
        let invalid = |field: &str, message: &str| ExperimentError::Invalid { field: field.into(), message: message.into() };
        if self.repetitions == 0 {
            return Err(invalid("repetitions", "need at least one repetition"));
        }
        if self.patches < 2 {
            return Err(invalid("patches", "need at least two boxes"));
        }
        match &self.source {
            NoiseSource::Constant { sigma, .. } if !(*sigma >= 0.0) => Err(invalid("source.sigma", "must be non-negative")),
            NoiseSource::Problem { percent, .. } if !(*percent >= 0.0) => Err(invalid("source.percent", "must be non-negative")),
            NoiseSource::Problem { problem, .. } => problem.validate().map_err(|e| invalid("source.problem", &e.to_string())),
            NoiseSource::Constant { .. } => Ok(()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NoiseStudyResult {
    pub n: usize,
    pub b: usize,
    pub lipschitz: f64,
    /// Noise variance actually injected.
    pub true_sigma2: f64,
    /// `sigma2_hat` per repetition.
    pub estimates: Vec<f64>,
    pub mean: f64,
    /// Unbiased sample variance of the estimates.
    pub variance: f64,
    /// `|mean - true| / true`, absent for noise-free data.
    pub relative_bias: Option<f64>,
    pub bias_bound: f64,
    /// Variance bound at the true noise level.
    pub variance_bound: f64,
}

fn constant_field(grid: &SpaceTimeGrid, value: f64, sigma: f64, seed: u64) -> Result<TrajectoryField, ExperimentError> {
    let normal = Normal::new(value, sigma).map_err(|e| ExperimentError::stage("noise", e))?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let a = ArrayD::from_shape_simple_fn(grid.shape(), || normal.sample(&mut rng));
    TrajectoryField::new(grid.clone(), vec![("u".into(), a)]).map_err(|e| ExperimentError::stage("noise", e))
}

fn field_sigma2(traj: &TrajectoryField, field: usize, percent: f64) -> f64 {
    let a = traj.field(field);
    let n = a.len() as f64;
    let mean = a.iter().sum::<f64>() / n;
    let var = a.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
    (percent / 100.0).powi(2) * var
}

/// Repeats the estimator on independently drawn noise and compares the
/// spread of the estimates with the bias and variance bounds. With an
/// output directory writes `noise_estimates.csv`, `noise_summary.json` and
/// `plot_noise.py`.
pub fn run_noise_estimate(cfg: &NoiseStudyConfig, parallelism: Option<usize>, output_dir: Option<&Path>) -> Result<NoiseStudyResult, ExperimentError> {
    cfg.validate()?;
    let result = pool(parallelism)?.install(|| -> Result<NoiseStudyResult, ExperimentError> {
        let clean = match &cfg.source {
            NoiseSource::Problem { problem, downsample, .. } => Some(solve_problem(problem, *downsample)?),
            NoiseSource::Constant { .. } => None,
        };
        let grid = match (&cfg.source, &clean) {
            (_, Some(t)) => t.grid().clone(),
            (NoiseSource::Constant { grid, .. }, None) => grid.clone(),
            _ => unreachable!("problem sources are solved"),
        };
        let boxes = noise_patches(&grid, cfg.patches, [cfg.radius; 2], cfg.time_radius).map_err(|e| ExperimentError::stage("noise_estimate", e))?;
        let (true_sigma2, lipschitz) = match (&cfg.source, &clean) {
            (NoiseSource::Constant { sigma, .. }, _) => (sigma * sigma, cfg.lipschitz.unwrap_or(0.0)),
            (NoiseSource::Problem { percent, .. }, Some(t)) => {
                if cfg.field >= t.field_count() {
                    return Err(ExperimentError::Invalid { field: "field".into(), message: format!("the trajectory has {} fields", t.field_count()) });
                }
                (field_sigma2(t, cfg.field, *percent), cfg.lipschitz.unwrap_or_else(|| lipschitz_estimate(t, cfg.field, &boxes)))
            }
            _ => unreachable!("problem sources are solved"),
        };
        let runs: Vec<NoiseEstimate> = (0..cfg.repetitions)
            .into_par_iter()
            .map(|i| {
                let seed = cfg.seed.wrapping_add(i as u64);
                let noisy = match (&cfg.source, &clean) {
                    (NoiseSource::Constant { value, sigma, grid }, _) => constant_field(grid, *value, *sigma, seed)?,
                    (NoiseSource::Problem { percent, .. }, Some(t)) => add_noise(t, *percent, seed).map_err(|e| ExperimentError::stage("noise", e))?,
                    _ => unreachable!("problem sources are solved"),
                };
                estimate_noise_variance(&noisy, cfg.field, &boxes, Some(lipschitz)).map_err(|e| ExperimentError::stage("noise_estimate", e))
            })
            .collect::<Result<_, _>>()?;
        let estimates: Vec<f64> = runs.iter().map(|r| r.sigma2_hat).collect();
        let m = estimates.len() as f64;
        let mean = estimates.iter().sum::<f64>() / m;
        let variance = if estimates.len() > 1 { estimates.iter().map(|e| (e - mean).powi(2)).sum::<f64>() / (m - 1.0) } else { 0.0 };
        let first = &runs[0];
        Ok(NoiseStudyResult {
            n: first.n,
            b: first.b,
            lipschitz,
            true_sigma2,
            mean,
            variance,
            relative_bias: (true_sigma2 > 0.0).then(|| (mean - true_sigma2).abs() / true_sigma2),
            bias_bound: first.bias_bound,
            variance_bound: NoiseEstimate::variance_bound_at(first.n, first.b, true_sigma2, first.gamma()),
            estimates,
        })
    })?;
    if let Some(dir) = output_dir.map(Path::to_path_buf).or_else(|| cfg.output_dir.clone()) {
        std::fs::create_dir_all(&dir)?;
        let mut f = std::io::BufWriter::new(std::fs::File::create(dir.join("noise_estimates.csv"))?);
        writeln!(f, "repetition,sigma2_hat")?;
        for (i, e) in result.estimates.iter().enumerate() {
            writeln!(f, "{i},{e}")?;
        }
        let mut f = std::io::BufWriter::new(std::fs::File::create(dir.join("noise_summary.json"))?);
        serde_json::to_writer_pretty(&mut f, &result)?;
        writeln!(f)?;
        std::fs::write(dir.join("plot_noise.py"), PLOT_NOISE)?;
    }
    Ok(result)
}

const PLOT_NOISE: &str = r#"# Histogram of the noise-variance estimates against the injected variance.
import csv
import json

import matplotlib.pyplot as plt

est = [float(r["sigma2_hat"]) for r in csv.DictReader(open("noise_estimates.csv"))]
summary = json.load(open("noise_summary.json"))
fig, ax = plt.subplots(figsize=(5, 3.5))
ax.hist(est, bins=20)
ax.axvline(summary["true_sigma2"], color="k", linestyle="--", label="injected")
ax.axvline(summary["mean"], color="r", label="mean estimate")
ax.set_xlabel("estimated noise variance")
ax.legend()
fig.tight_layout()
fig.savefig("noise.png", dpi=150)
"#;

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::Expr;
    use crate::solvers::{Equation, InitialCondition};

    fn constant(reps: usize) -> NoiseStudyConfig {
        NoiseStudyConfig {
            name: "c".into(),
            source: NoiseSource::Constant { value: 2.0, sigma: 0.1, grid: SpaceTimeGrid::periodic_1d(70, [0.0, 1.0], 70, [0.0, 1.0]).unwrap() },
            field: 0,
            patches: 100,
            radius: 3,
            time_radius: 3,
            repetitions: reps,
            seed: 11,
            lipschitz: None,
            output_dir: None,
        }
    }

    #[test]
    fn constant_field_has_zero_bias_bound() {
        let r = run_noise_estimate(&constant(20), Some(1), None).unwrap();
        assert_eq!((r.n, r.b), (100, 49));
        assert_eq!(r.bias_bound, 0.0);
        assert_eq!(r.lipschitz, 0.0);
        assert!((r.true_sigma2 - 0.01).abs() < 1e-15);
        assert!(r.relative_bias.unwrap() < 0.1, "{:?}", r.relative_bias);
        // 2 s^4 / (N - 1) with gamma = 0
        assert!((r.variance_bound - 2e-4 / 99.0).abs() < 1e-15);
    }

    #[test]
    fn repetitions_are_reproducible_and_written() {
        let dir = tempfile::tempdir().unwrap();
        let a = run_noise_estimate(&constant(3), Some(1), Some(dir.path())).unwrap();
        let b = run_noise_estimate(&constant(3), Some(1), None).unwrap();
        assert_eq!(a, b);
        let csv = std::fs::read_to_string(dir.path().join("noise_estimates.csv")).unwrap();
        assert_eq!(csv.lines().count(), 4);
        let back: NoiseStudyResult = serde_json::from_str(&std::fs::read_to_string(dir.path().join("noise_summary.json")).unwrap()).unwrap();
        assert_eq!(back, a);
    }

    #[test]
    fn solved_problem_source() {
        let grid = SpaceTimeGrid::periodic_1d(140, [0.0, 2.0], 140, [0.0, 0.5]).unwrap();
        let init = InitialCondition::Custom { expr: Expr::parse("sin(pi*x)").unwrap() };
        let problem = EvolutionProblem::new(Equation::Transport1d { speed: Expr::constant(1.0) }, init, grid);
        let cfg = NoiseStudyConfig { source: NoiseSource::Problem { problem, percent: 5.0, downsample: None }, patches: 200, repetitions: 4, ..constant(1) };
        let r = run_noise_estimate(&cfg, Some(1), None).unwrap();
        // spread of sin over whole periods is 1/sqrt(2)
        assert!((r.true_sigma2 - 0.05f64.powi(2) / 2.0).abs() < 1e-6);
        // |(u_x, u_t)| peaks at sqrt(2) pi since u_t = u_x
        let l = std::f64::consts::SQRT_2 * std::f64::consts::PI;
        assert!((r.lipschitz - l).abs() < 0.005 * l, "{}", r.lipschitz);
        assert!(r.relative_bias.unwrap() < 0.2);
        assert!(r.bias_bound > 0.0);
    }

    #[test]
    fn validation() {
        let mut c = constant(0);
        assert!(matches!(c.validate(), Err(ExperimentError::Invalid { ref field, .. }) if field == "repetitions"));
        c.repetitions = 1;
        c.patches = 1;
        assert!(matches!(c.validate(), Err(ExperimentError::Invalid { ref field, .. }) if field == "patches"));
    }
}
