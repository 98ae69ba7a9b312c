use std::io::Write;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::{run_experiment, Aggregate, ExperimentConfig, ExperimentError, ExperimentReport, RunOptions};

/// Runs each experiment twice, with both patch filters on and with both
/// off, everything else identical.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrimComparisonConfig {
    pub name: String,
    pub experiments: Vec<ExperimentConfig>,
    #[serde(default)]
    pub output_dir: Option<PathBuf>,
}

impl TrimComparisonConfig {
    pub fn from_toml_str(src: &str) -> Result<Self, ExperimentError> {
        let c: TrimComparisonConfig = toml::from_str(src)?;
        c.validate()?;
        Ok(c)
    }

    pub fn load(path: &Path) -> Result<Self, ExperimentError> {
        Self::from_toml_str(&std::fs::read_to_string(path)?)
    }

    pub fn validate(&self) -> Result<(), ExperimentError> {
        if self.experiments.is_empty() {
            return Err(ExperimentError::Invalid { field: "experiments".into(), message: "nothing to compare".into() });
        }
        for (i, e) in self.experiments.iter().enumerate() {
            if self.experiments[..i].iter().any(|o| o.name == e.name) {
                return Err(ExperimentError::Invalid { field: "experiments.name".into(), message: format!("duplicate name `{}`", e.name) });
            }
            e.validate()?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrimRow {
    pub equation: String,
    pub with_trim: Aggregate,
    pub without_trim: Aggregate,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrimComparison {
    pub name: String,
    pub rows: Vec<TrimRow>,
    /// Full reports, `(with, without)` per experiment.
    pub reports: Vec<(ExperimentReport, ExperimentReport)>,
}

impl TrimComparison {
    pub fn all_completed(&self) -> bool {
        self.reports.iter().all(|(a, b)| a.all_completed() && b.all_completed())
    }

    /// Two rows, with and without trimming, one column of mean Jaccard
    /// scores per equation.
    pub fn write_table<W: Write>(&self, w: &mut W) -> Result<(), ExperimentError> {
        let names: Vec<&str> = self.rows.iter().map(|r| r.equation.as_str()).collect();
        writeln!(w, "setting,{}", names.join(","))?;
        let cell = |a: &Aggregate| a.mean_jaccard.map_or(String::new(), |v| v.to_string());
        let with: Vec<String> = self.rows.iter().map(|r| cell(&r.with_trim)).collect();
        let without: Vec<String> = self.rows.iter().map(|r| cell(&r.without_trim)).collect();
        writeln!(w, "with trimming,{}", with.join(","))?;
        writeln!(w, "without trimming,{}", without.join(","))?;
        Ok(())
    }
}

fn with_filters(cfg: &ExperimentConfig, on: bool) -> ExperimentConfig {
    let mut c = cfg.clone();
    c.filters.sobolev = on;
    c.filters.variation = on;
    c.output_dir = None;
    c
}

/// The trimming ablation. With an output directory, each run's report goes
/// to `<name>/with_trim` and `<name>/without_trim`, and the table to
/// `trim_table.csv` next to `plot_trim.py`.
pub fn run_trim_comparison(cfg: &TrimComparisonConfig, opts: &RunOptions) -> Result<TrimComparison, ExperimentError> {
    cfg.validate()?;
    let out = opts.output_dir.clone().or_else(|| cfg.output_dir.clone());
    let mut rows = Vec::with_capacity(cfg.experiments.len());
    let mut reports = Vec::with_capacity(cfg.experiments.len());
    for e in &cfg.experiments {
        let run = |on: bool, sub: &str| {
            let o = RunOptions { output_dir: out.as_ref().map(|d| d.join(&e.name).join(sub)), ..opts.clone() };
            run_experiment(&with_filters(e, on), &o)
        };
        let with = run(true, "with_trim")?;
        let without = run(false, "without_trim")?;
        rows.push(TrimRow { equation: e.name.clone(), with_trim: with.aggregate.clone(), without_trim: without.aggregate.clone() });
        reports.push((with, without));
    }
    let result = TrimComparison { name: cfg.name.clone(), rows, reports };
    if let Some(dir) = out {
        std::fs::create_dir_all(&dir)?;
        result.write_table(&mut std::io::BufWriter::new(std::fs::File::create(dir.join("trim_table.csv"))?))?;
        std::fs::write(dir.join("plot_trim.py"), PLOT_TRIM)?;
    }
    Ok(result)
}

const PLOT_TRIM: &str = r#"# Mean identification accuracy with and without patch trimming.
import csv

import matplotlib.pyplot as plt

rows = list(csv.reader(open("trim_table.csv")))
names = rows[0][1:]
fig, ax = plt.subplots(figsize=(5, 3.5))
width = 0.4
for i, row in enumerate(rows[1:]):
    vals = [float(v) if v else 0.0 for v in row[1:]]
    ax.bar([j + i * width for j in range(len(names))], vals, width, label=row[0])
ax.set_xticks([j + width / 2 for j in range(len(names))])
ax.set_xticklabels(names)
ax.set_ylabel("mean Jaccard score")
ax.set_ylim(0, 1.05)
ax.legend()
fig.tight_layout()
fig.savefig("trim.png", dpi=150)
"#;
