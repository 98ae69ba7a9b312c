use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use caslr::experiment::{
    run_dimension_study, run_experiment, run_noise_estimate, run_trim_comparison, solve_problem, DimensionStudyConfig, ExperimentConfig,
    ExperimentError, NoiseStudyConfig, RunOptions, TrimComparisonConfig,
};

#[derive(Parser)]
#[command(name = "caslr", version, about = "PDE identification from a single trajectory")]
struct Cli {
    #[command(subcommand)]
    verb: Verb,
}

#[derive(Args)]
struct Common {
    /// Study config (TOML).
    #[arg(short, long)]
    config: PathBuf,
    /// Output directory; overrides the config's.
    #[arg(short, long)]
    output: Option<PathBuf>,
    /// Base seed override.
    #[arg(short, long)]
    seed: Option<u64>,
    /// Worker threads (default: all cores).
    #[arg(short = 'j', long)]
    parallelism: Option<usize>,
}

#[derive(Subcommand)]
enum Verb {
    /// Solve an experiment's problem and write the trajectory.
    Solve {
        #[command(flatten)]
        common: Common,
        /// Also write a long-format CSV.
        #[arg(long)]
        csv: bool,
    },
    /// Run identification trials.
    Identify(Common),
    /// Singular-value dimension study.
    DimensionStudy(Common),
    /// Accuracy with and without patch trimming.
    TrimCompare(Common),
    /// Monte-Carlo study of the noise-variance estimator.
    NoiseEstimate(Common),
}

impl Common {
    fn options(&self) -> RunOptions {
        RunOptions { parallelism: self.parallelism, output_dir: self.output.clone(), seed: self.seed }
    }

    fn out_or(&self, fallback: Option<&Path>) -> Option<PathBuf> {
        self.output.clone().or_else(|| fallback.map(Path::to_path_buf))
    }
}

fn mean(v: Option<f64>) -> String {
    v.map_or("n/a".into(), |x| format!("{x:.4}"))
}

fn run(verb: Verb) -> Result<bool, ExperimentError> {
    match verb {
        Verb::Solve { common, csv } => {
            let cfg = ExperimentConfig::load(&common.config)?;
            let dir = common.out_or(cfg.output_dir.as_deref()).unwrap_or_else(|| PathBuf::from("."));
            std::fs::create_dir_all(&dir)?;
            let traj = solve_problem(&cfg.problem, cfg.downsample)?;
            traj.write_binary(&dir.join("trajectory.bin")).map_err(|e| ExperimentError::stage("solve", e))?;
            if csv {
                traj.write_csv(&dir.join("trajectory.csv")).map_err(|e| ExperimentError::stage("solve", e))?;
            }
            println!("{}: solved {:?} into {}", cfg.name, traj.grid().shape(), dir.display());
            Ok(true)
        }
        Verb::Identify(common) => {
            let cfg = ExperimentConfig::load(&common.config)?;
            let report = run_experiment(&cfg, &common.options())?;
            for t in &report.trials {
                match &t.failed_stage {
                    None => println!("trial {:3}  jaccard {}  {}", t.trial, mean(t.jaccard), t.equations.join("; ")),
                    Some(s) => println!("trial {:3}  failed at {s}: {}", t.trial, t.error.as_deref().unwrap_or("")),
                }
            }
            let a = &report.aggregate;
            println!(
                "{}: {}/{} completed, mean jaccard {}, mean coefficient error {}",
                report.name,
                a.completed,
                a.trials,
                mean(a.mean_jaccard),
                mean(a.mean_coefficient_error)
            );
            Ok(report.all_completed())
        }
        Verb::DimensionStudy(common) => {
            let mut cfg = DimensionStudyConfig::load(&common.config)?;
            if let (Some(s), Some(sweep)) = (common.seed, cfg.mode_sweep.as_mut()) {
                sweep.seed = s;
            }
            let res = run_dimension_study(&cfg, common.parallelism, common.output.as_deref())?;
            for (label, r) in &res.reports {
                let counts: Vec<String> = r.counts.iter().map(|(t, c)| format!("{t:e}:{c}")).collect();
                println!("{label} [{}, {}]  {}", r.window.0, r.window.1, counts.join(" "));
            }
            for row in &res.mode_sweep {
                println!("M = {:2}  dominant {:.2}%", row.modes, row.mean_percentage);
            }
            Ok(true)
        }
        Verb::TrimCompare(common) => {
            let cfg = TrimComparisonConfig::load(&common.config)?;
            let res = run_trim_comparison(&cfg, &common.options())?;
            let mut out = Vec::new();
            res.write_table(&mut out)?;
            print!("{}", String::from_utf8_lossy(&out));
            Ok(res.all_completed())
        }
        Verb::NoiseEstimate(common) => {
            let mut cfg = NoiseStudyConfig::load(&common.config)?;
            if let Some(s) = common.seed {
                cfg.seed = s;
            }
            let res = run_noise_estimate(&cfg, common.parallelism, common.output.as_deref())?;
            println!(
                "{}: mean sigma2_hat {:.6e} (injected {:.6e}), variance {:.3e}, bound {:.3e}",
                cfg.name, res.mean, res.true_sigma2, res.variance, res.variance_bound
            );
            Ok(true)
        }
    }
}

fn main() -> ExitCode {
    match run(Cli::parse().verb) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
