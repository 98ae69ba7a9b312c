use std::io::Write;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{pool, ExperimentError};
use crate::solvers::{solve, EvolutionProblem, InitialCondition};
use crate::spectral::{svd_dimension_report, SvdReport, ThresholdMode};

/// One trajectory whose snapshot matrix is analysed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DimensionProblem {
    /// Used in output file names.
    pub label: String,
    pub problem: EvolutionProblem,
    #[serde(default)]
    pub field: usize,
}

/// Dominant counts against the number of random Fourier modes, averaged
/// over seeds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModeSweep {
    pub label: String,
    /// Template; its initial data must be `random_fourier`.
    pub problem: EvolutionProblem,
    pub modes: Vec<usize>,
    /// Seeds per mode count, `seed .. seed + seeds`.
    pub seeds: usize,
    #[serde(default)]
    pub seed: u64,
    pub threshold: f64,
    /// Whole time range when absent.
    #[serde(default)]
    pub window: Option<[f64; 2]>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DimensionStudyConfig {
    pub name: String,
    #[serde(default)]
    pub problems: Vec<DimensionProblem>,
    /// Time windows applied to every problem; the whole range when empty.
    #[serde(default)]
    pub windows: Vec<[f64; 2]>,
    pub thresholds: Vec<f64>,
    #[serde(default)]
    pub mode: ThresholdMode,
    #[serde(default)]
    pub mode_sweep: Option<ModeSweep>,
    #[serde(default)]
    pub output_dir: Option<PathBuf>,
}

impl DimensionStudyConfig {
    pub fn from_toml_str(src: &str) -> Result<Self, ExperimentError> {
        let c: DimensionStudyConfig = toml::from_str(src)?;
        c.validate()?;
        Ok(c)
    }

    pub fn load(path: &Path) -> Result<Self, ExperimentError> {
        Self::from_toml_str(&std::fs::read_to_string(path)?)
    }

    pub fn validate(&self) -> Result<(), ExperimentError> {
        let invalid = |field: &str, message: &str| ExperimentError::Invalid { field: field.into(), message: message.into() };
        if self.problems.is_empty() && self.mode_sweep.is_none() {
            return Err(invalid("problems", "nothing to analyse"));
        }
        for p in &self.problems {
            p.problem.validate().map_err(|e| invalid("problems.problem", &e.to_string()))?;
            if p.label.is_empty() || p.label.contains(['/', '\\']) {
                return Err(invalid("problems.label", "labels must be nonempty file-name fragments"));
            }
        }
        if self.windows.iter().any(|w| !(w[0] <= w[1])) {
            return Err(invalid("windows", "each window needs start <= end"));
        }
        if self.thresholds.iter().any(|t| !(*t >= 0.0)) {
            return Err(invalid("thresholds", "thresholds must be non-negative"));
        }
        if let Some(s) = &self.mode_sweep {
            if !matches!(s.problem.initial, InitialCondition::RandomFourier { .. }) {
                return Err(invalid("mode_sweep.problem", "initial data must be random_fourier"));
            }
            if s.modes.is_empty() || s.seeds == 0 {
                return Err(invalid("mode_sweep", "need at least one mode count and one seed"));
            }
        }
        Ok(())
    }
}

/// Average over seeds at one mode count.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModeSweepRow {
    pub modes: usize,
    pub mean_count: f64,
    /// Dominant singular values as a percentage of all of them.
    pub mean_percentage: f64,
    pub std_percentage: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DimensionStudyResult {
    /// `(label, report)` per problem and window, windows varying fastest.
    pub reports: Vec<(String, SvdReport)>,
    pub mode_sweep: Vec<ModeSweepRow>,
}

fn window_of(p: &EvolutionProblem, w: Option<[f64; 2]>) -> (f64, f64) {
    let [a, b] = w.unwrap_or(p.grid.time_extent());
    (a, b)
}

fn sweep(s: &ModeSweep, mode: ThresholdMode) -> Result<Vec<ModeSweepRow>, ExperimentError> {
    s.modes
        .iter()
        .map(|&m| {
            let pct = (0..s.seeds)
                .into_par_iter()
                .map(|i| {
                    let mut p = s.problem.clone();
                    if let InitialCondition::RandomFourier { modes, seed, .. } = &mut p.initial {
                        *modes = m;
                        *seed = s.seed.wrapping_add(i as u64);
                    }
                    let traj = solve(&p).map_err(|e| ExperimentError::stage("solve", e))?;
                    let r = svd_dimension_report(&traj, 0, window_of(&p, s.window), &[s.threshold], mode)
                        .map_err(|e| ExperimentError::stage("svd", e))?;
                    Ok((r.counts[0].1 as f64, 100.0 * r.counts[0].1 as f64 / r.singular_values.len().max(1) as f64))
                })
                .collect::<Result<Vec<_>, ExperimentError>>()?;
            let n = pct.len() as f64;
            let mean_count = pct.iter().map(|p| p.0).sum::<f64>() / n;
            let mean_percentage = pct.iter().map(|p| p.1).sum::<f64>() / n;
            let var = pct.iter().map(|p| (p.1 - mean_percentage).powi(2)).sum::<f64>() / n;
            Ok(ModeSweepRow { modes: m, mean_count, mean_percentage, std_percentage: var.sqrt() })
        })
        .collect()
}

/// Singular spectra of every configured problem and window, plus the
/// optional mode-count sweep. With an output directory, writes
/// `singular_values_<label>_<w>.csv`, `dimension_<label>_<w>.csv`,
/// `dimension_summary.csv`, `mode_sweep.csv` and `plot_dimension.py`.
pub fn run_dimension_study(cfg: &DimensionStudyConfig, parallelism: Option<usize>, output_dir: Option<&Path>) -> Result<DimensionStudyResult, ExperimentError> {
    cfg.validate()?;
    let windows: Vec<Option<[f64; 2]>> = if cfg.windows.is_empty() { vec![None] } else { cfg.windows.iter().map(|w| Some(*w)).collect() };
    let result = pool(parallelism)?.install(|| -> Result<DimensionStudyResult, ExperimentError> {
        let mut reports = Vec::new();
        for p in &cfg.problems {
            let traj = solve(&p.problem).map_err(|e| ExperimentError::stage("solve", e))?;
            for &w in &windows {
                let r = svd_dimension_report(&traj, p.field, window_of(&p.problem, w), &cfg.thresholds, cfg.mode)
                    .map_err(|e| ExperimentError::stage("svd", e))?;
                reports.push((p.label.clone(), r));
            }
        }
        let mode_sweep = match &cfg.mode_sweep {
            Some(s) => sweep(s, cfg.mode)?,
            None => vec![],
        };
        Ok(DimensionStudyResult { reports, mode_sweep })
    })?;
    if let Some(dir) = output_dir.map(Path::to_path_buf).or_else(|| cfg.output_dir.clone()) {
        write_outputs(&result, cfg, windows.len(), &dir)?;
    }
    Ok(result)
}

fn create(path: PathBuf) -> Result<std::io::BufWriter<std::fs::File>, ExperimentError> {
    Ok(std::io::BufWriter::new(std::fs::File::create(path)?))
}

fn write_outputs(res: &DimensionStudyResult, cfg: &DimensionStudyConfig, per_problem: usize, dir: &Path) -> Result<(), ExperimentError> {
    std::fs::create_dir_all(dir)?;
    let mut summary = create(dir.join("dimension_summary.csv"))?;
    writeln!(summary, "label,window_start,window_end,rows,cols,threshold,count,percentage")?;
    for (i, (label, r)) in res.reports.iter().enumerate() {
        let w = i % per_problem;
        r.write_csv(&mut create(dir.join(format!("singular_values_{label}_{w}.csv")))?).map_err(|e| ExperimentError::stage("svd", e))?;
        r.write_counts_csv(&mut create(dir.join(format!("dimension_{label}_{w}.csv")))?).map_err(|e| ExperimentError::stage("svd", e))?;
        let n = r.singular_values.len().max(1) as f64;
        for &(t, c) in &r.counts {
            writeln!(summary, "{label},{},{},{},{},{t},{c},{}", r.window.0, r.window.1, r.shape.0, r.shape.1, 100.0 * c as f64 / n)?;
        }
    }
    if cfg.mode_sweep.is_some() {
        let mut f = create(dir.join("mode_sweep.csv"))?;
        writeln!(f, "modes,mean_count,mean_percentage,std_percentage")?;
        for row in &res.mode_sweep {
            writeln!(f, "{},{},{},{}", row.modes, row.mean_count, row.mean_percentage, row.std_percentage)?;
        }
    }
    std::fs::write(dir.join("plot_dimension.py"), PLOT_DIMENSION)?;
    Ok(())
}

const PLOT_DIMENSION: &str = r#"# Dominant singular-value percentage per threshold, and per mode count when a sweep was run.
import csv
import os
from collections import defaultdict

import matplotlib.pyplot as plt

series = defaultdict(list)
for r in csv.DictReader(open("dimension_summary.csv")):
    key = "%s [%s, %s]" % (r["label"], r["window_start"], r["window_end"])
    series[key].append((float(r["threshold"]), float(r["percentage"])))
fig, ax = plt.subplots(figsize=(5, 3.5))
for key, pts in series.items():
    pts.sort()
    ax.semilogx([p[0] for p in pts], [p[1] for p in pts], "o-", label=key)
ax.set_xlabel("threshold")
ax.set_ylabel("dominant singular values (%)")
ax.legend(fontsize=7)
fig.tight_layout()
fig.savefig("dimension.png", dpi=150)

if os.path.exists("mode_sweep.csv"):
    rows = list(csv.DictReader(open("mode_sweep.csv")))
    fig, ax = plt.subplots(figsize=(5, 3.5))
    ax.errorbar([int(r["modes"]) for r in rows], [float(r["mean_percentage"]) for r in rows],
                yerr=[float(r["std_percentage"]) for r in rows], fmt="o-")
    ax.set_xlabel("number of modes M")
    ax.set_ylabel("dominant singular values (%)")
    fig.tight_layout()
    fig.savefig("mode_sweep.png", dpi=150)
"#;

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::Expr;
    use crate::solvers::{Equation, SpaceTimeGrid};

    fn heat(label: &str) -> DimensionProblem {
        let grid = SpaceTimeGrid::periodic_1d(32, [0.0, 2.0], 40, [0.0, 1.0]).unwrap();
        let init = InitialCondition::Custom { expr: Expr::parse("sin(pi*x) + 0.5*cos(3*pi*x)").unwrap() };
        DimensionProblem { label: label.into(), problem: EvolutionProblem::new(Equation::Heat1d { diffusivity: Expr::constant(0.1) }, init, grid), field: 0 }
    }

    #[test]
    fn full_window_counts_everything_at_zero() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = DimensionStudyConfig {
            name: "t".into(),
            problems: vec![heat("heat")],
            windows: vec![],
            thresholds: vec![0.0, 1e-3],
            mode: ThresholdMode::Relative,
            mode_sweep: None,
            output_dir: None,
        };
        let res = run_dimension_study(&cfg, Some(1), Some(dir.path())).unwrap();
        assert_eq!(res.reports.len(), 1);
        let r = &res.reports[0].1;
        assert_eq!(r.counts[0], (0.0, 32));
        let body = std::fs::read_to_string(dir.path().join("dimension_heat_0.csv")).unwrap();
        assert_eq!(body.lines().nth(1).unwrap(), "0,32,1");
        assert!(dir.path().join("plot_dimension.py").exists());
        assert!(!dir.path().join("mode_sweep.csv").exists());
    }

    #[test]
    fn one_report_per_window() {
        let cfg = DimensionStudyConfig {
            name: "t".into(),
            problems: vec![heat("a"), heat("b")],
            windows: vec![[0.0, 0.5], [0.5, 1.0]],
            thresholds: vec![1e-3],
            mode: ThresholdMode::Relative,
            mode_sweep: None,
            output_dir: None,
        };
        let res = run_dimension_study(&cfg, Some(1), None).unwrap();
        let labels: Vec<&str> = res.reports.iter().map(|r| r.0.as_str()).collect();
        assert_eq!(labels, ["a", "a", "b", "b"]);
        assert!(res.reports[1].1.window.0 >= 0.5);
    }

    #[test]
    fn mode_sweep_grows_with_modes() {
        let grid = SpaceTimeGrid::periodic_1d(64, [-1.0, 1.0], 60, [0.0, 0.5]).unwrap();
        let init = InitialCondition::RandomFourier { modes: 1, seed: 0, offset: 0.0, half_period: None };
        let sweep = ModeSweep {
            label: "transport".into(),
            problem: EvolutionProblem::new(Equation::Transport1d { speed: Expr::constant(1.0) }, init, grid),
            modes: vec![1, 4],
            seeds: 2,
            seed: 3,
            threshold: 1e-3,
            window: None,
        };
        let cfg = DimensionStudyConfig { name: "s".into(), problems: vec![], windows: vec![], thresholds: vec![], mode: ThresholdMode::Relative, mode_sweep: Some(sweep), output_dir: None };
        let res = run_dimension_study(&cfg, Some(1), None).unwrap();
        assert_eq!(res.mode_sweep.len(), 2);
        assert!(res.mode_sweep[1].mean_count > res.mode_sweep[0].mean_count);
    }

    #[test]
    fn rejects_empty_and_bad_sweeps() {
        let mut cfg = DimensionStudyConfig { name: "e".into(), problems: vec![], windows: vec![], thresholds: vec![], mode: ThresholdMode::Relative, mode_sweep: None, output_dir: None };
        assert!(matches!(cfg.validate(), Err(ExperimentError::Invalid { ref field, .. }) if field == "problems"));
        let p = heat("h");
        cfg.mode_sweep = Some(ModeSweep { label: "x".into(), problem: p.problem, modes: vec![1], seeds: 1, seed: 0, threshold: 1e-3, window: None });
        assert!(matches!(cfg.validate(), Err(ExperimentError::Invalid { ref field, .. }) if field == "mode_sweep.problem"));
    }
}
