//! Constant-coefficient identification from two Fourier snapshots.

use caslr::spectral::{identify_constant_coeff, required_modes, SpectralOptions};
use ndarray::{ArrayD, IxDyn};
use std::f64::consts::PI;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    // u_t = 0.5 u_xx + 1.5 u_x - 0.2 u, each mode m evolving exactly
    let (n, l, dt) = (64, 2.0, 0.01);
    let amps = [(1, 1.0), (2, 0.7), (3, 0.4), (4, 0.3), (5, 0.2)];
    let snap = |t: f64| {
        ArrayD::from_shape_fn(IxDyn(&[n]), |ix| {
            let x = ix[0] as f64 * l / n as f64;
            amps.iter()
                .map(|&(m, a)| {
                    let z = 2.0 * PI * m as f64 / l;
                    a * (-0.5 * z * z * t - 0.2 * t).exp() * (z * (x + 1.5 * t)).sin()
                })
                .sum::<f64>()
        })
    };
    let opts = SpectralOptions { order: 2, ..Default::default() };
    println!("modes needed for order 2: {}", required_modes(1, 2));
    let id = identify_constant_coeff(&snap(0.0), &snap(dt), &[l], dt, &opts)?;
    for (name, v) in id.named("u") {
        println!("{name:5} {v:+.10}");
    }
    Ok(())
}
