//! Monte-Carlo behaviour of the noise-variance estimator on a constant
//! field, from the shipped config.

use caslr::experiment::{run_noise_estimate, NoiseStudyConfig};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let cfg = NoiseStudyConfig::load(concat!(env!("CARGO_MANIFEST_DIR"), "/configs/noise_constant.toml").as_ref())?;
    let r = run_noise_estimate(&cfg, None, None)?;
    println!("N = {}, B = {}, {} repetitions", r.n, r.b, r.estimates.len());
    println!("mean {:.5e} vs injected {:.5e} (relative bias {:.2}%)", r.mean, r.true_sigma2, 100.0 * r.relative_bias.unwrap_or(0.0));
    println!("variance {:.3e}, bound {:.3e}", r.variance, r.variance_bound);
    Ok(())
}
