use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::ExperimentError;

/// Outcome of one trial. A failed trial keeps the stage that failed and
/// leaves the metrics empty.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialRecord {
    pub trial: usize,
    pub seed: u64,
    pub completed: bool,
    pub failed_stage: Option<String>,
    pub error: Option<String>,
    pub jaccard: Option<f64>,
    pub coefficient_error: Option<f64>,
    /// One `target_t = ...` string per identified equation.
    pub equations: Vec<String>,
    pub chosen_levels: Vec<usize>,
    pub patches_total: usize,
    pub patches_kept: usize,
    pub dropped_by_sobolev: usize,
    pub dropped_by_variation: usize,
    pub sigma_hat: Option<f64>,
    pub rank_deficient: bool,
}

impl TrialRecord {
    pub(crate) fn failed(trial: usize, seed: u64, stage: &str, error: String) -> Self {
        TrialRecord {
            trial,
            seed,
            completed: false,
            failed_stage: Some(stage.to_string()),
            error: Some(error),
            jaccard: None,
            coefficient_error: None,
            equations: vec![],
            chosen_levels: vec![],
            patches_total: 0,
            patches_kept: 0,
            dropped_by_sobolev: 0,
            dropped_by_variation: 0,
            sigma_hat: None,
            rank_deficient: false,
        }
    }
}

/// Means and population standard deviations over completed trials.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Aggregate {
    pub trials: usize,
    pub completed: usize,
    pub mean_jaccard: Option<f64>,
    pub std_jaccard: Option<f64>,
    pub mean_coefficient_error: Option<f64>,
    pub std_coefficient_error: Option<f64>,
}

fn mean_std(v: &[f64]) -> (Option<f64>, Option<f64>) {
    if v.is_empty() {
        return (None, None);
    }
    let n = v.len() as f64;
    let m = v.iter().sum::<f64>() / n;
    let var = v.iter().map(|x| (x - m).powi(2)).sum::<f64>() / n;
    (Some(m), Some(var.sqrt()))
}

impl Aggregate {
    pub fn from_trials(rows: &[TrialRecord]) -> Self {
        let done: Vec<&TrialRecord> = rows.iter().filter(|r| r.completed).collect();
        let j: Vec<f64> = done.iter().filter_map(|r| r.jaccard).collect();
        let e: Vec<f64> = done.iter().filter_map(|r| r.coefficient_error).collect();
        let (mean_jaccard, std_jaccard) = mean_std(&j);
        let (mean_coefficient_error, std_coefficient_error) = mean_std(&e);
        Aggregate { trials: rows.len(), completed: done.len(), mean_jaccard, std_jaccard, mean_coefficient_error, std_coefficient_error }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub name: String,
    /// FNV-1a of the canonical TOML form of the config, in hex.
    pub config_hash: String,
    pub library_version: String,
    pub trials: Vec<TrialRecord>,
    pub aggregate: Aggregate,
}

fn opt(v: Option<f64>) -> String {
    v.map_or(String::new(), |x| x.to_string())
}

fn csv_text(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

impl ExperimentReport {
    pub fn all_completed(&self) -> bool {
        self.trials.iter().all(|t| t.completed)
    }

    pub fn write_trials_csv<W: Write>(&self, w: &mut W) -> Result<(), ExperimentError> {
        writeln!(
            w,
            "trial,seed,completed,failed_stage,jaccard,coefficient_error,equations,chosen_levels,patches_total,patches_kept,dropped_by_sobolev,dropped_by_variation,sigma_hat,rank_deficient"
        )?;
        for t in &self.trials {
            let levels: Vec<String> = t.chosen_levels.iter().map(|l| l.to_string()).collect();
            writeln!(
                w,
                "{},{},{},{},{},{},{},{},{},{},{},{},{},{}",
                t.trial,
                t.seed,
                t.completed,
                t.failed_stage.as_deref().unwrap_or(""),
                opt(t.jaccard),
                opt(t.coefficient_error),
                csv_text(&t.equations.join("; ")),
                levels.join(" "),
                t.patches_total,
                t.patches_kept,
                t.dropped_by_sobolev,
                t.dropped_by_variation,
                opt(t.sigma_hat),
                t.rank_deficient
            )?;
        }
        Ok(())
    }

    pub fn write_summary_csv<W: Write>(&self, w: &mut W) -> Result<(), ExperimentError> {
        let a = &self.aggregate;
        writeln!(w, "name,trials,completed,mean_jaccard,std_jaccard,mean_coefficient_error,std_coefficient_error")?;
        writeln!(
            w,
            "{},{},{},{},{},{},{}",
            csv_text(&self.name),
            a.trials,
            a.completed,
            opt(a.mean_jaccard),
            opt(a.std_jaccard),
            opt(a.mean_coefficient_error),
            opt(a.std_coefficient_error)
        )?;
        Ok(())
    }

    /// `report.json`, `trials.csv`, `summary.csv` and `plot_trials.py`.
    pub fn write_to(&self, dir: &Path) -> Result<(), ExperimentError> {
        std::fs::create_dir_all(dir)?;
        let mut f = std::io::BufWriter::new(std::fs::File::create(dir.join("report.json"))?);
        serde_json::to_writer_pretty(&mut f, self)?;
        writeln!(f)?;
        self.write_trials_csv(&mut std::io::BufWriter::new(std::fs::File::create(dir.join("trials.csv"))?))?;
        self.write_summary_csv(&mut std::io::BufWriter::new(std::fs::File::create(dir.join("summary.csv"))?))?;
        std::fs::write(dir.join("plot_trials.py"), PLOT_TRIALS)?;
        Ok(())
    }
}

const PLOT_TRIALS: &str = r#"# Per-trial identification accuracy and coefficient error from trials.csv.
import csv
import sys

import matplotlib.pyplot as plt

path = sys.argv[1] if len(sys.argv) > 1 else "trials.csv"
rows = [r for r in csv.DictReader(open(path)) if r["completed"] == "true"]
trial = [int(r["trial"]) for r in rows]
fig, ax = plt.subplots(1, 2, figsize=(9, 3.5))
ax[0].plot(trial, [float(r["jaccard"]) for r in rows], "o")
ax[0].set_xlabel("trial")
ax[0].set_ylabel("Jaccard score")
ax[0].set_ylim(-0.05, 1.05)
err = [float(r["coefficient_error"]) for r in rows if r["coefficient_error"]]
ax[1].semilogy([int(r["trial"]) for r in rows if r["coefficient_error"]], err, "o")
ax[1].set_xlabel("trial")
ax[1].set_ylabel("coefficient error")
fig.tight_layout()
fig.savefig("trials.png", dpi=150)
"#;
