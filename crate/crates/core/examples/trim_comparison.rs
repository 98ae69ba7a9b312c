//! Identification accuracy with and without patch trimming on noisy heat
//! data (a reduced version of the shipped trim_table config).

use caslr::experiment::{run_trim_comparison, RunOptions, TrimComparisonConfig};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mut cfg = TrimComparisonConfig::load(concat!(env!("CARGO_MANIFEST_DIR"), "/configs/trim_table.toml").as_ref())?;
    cfg.experiments.retain(|e| e.name == "heat");
    cfg.experiments[0].trials = 5;
    let res = run_trim_comparison(&cfg, &RunOptions::default())?;
    let mut table = Vec::new();
    res.write_table(&mut table)?;
    print!("{}", String::from_utf8(table)?);
    Ok(())
}
