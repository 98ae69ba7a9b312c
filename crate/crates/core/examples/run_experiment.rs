//! Run an identification study from a config file.
//!
//! `cargo run --release --example run_experiment -- configs/example1_transport.toml out_dir`

use caslr::experiment::{run_experiment, ExperimentConfig, RunOptions};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mut args = std::env::args().skip(1);
    let path = args.next().unwrap_or_else(|| concat!(env!("CARGO_MANIFEST_DIR"), "/configs/random_init_transport.toml").into());
    let mut cfg = ExperimentConfig::load(path.as_ref())?;
    cfg.trials = cfg.trials.min(5);
    let opts = RunOptions { output_dir: args.next().map(Into::into), ..Default::default() };
    let report = run_experiment(&cfg, &opts)?;
    for t in &report.trials {
        println!("trial {}: jaccard {:?}  {}", t.trial, t.jaccard, t.equations.join("; "));
    }
    println!("mean jaccard {:?} over {} completed trials", report.aggregate.mean_jaccard, report.aggregate.completed);
    Ok(())
}
