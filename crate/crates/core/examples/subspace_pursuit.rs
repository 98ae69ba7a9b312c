//! Group subspace pursuit at fixed sparsity against brute force on a small
//! random instance.

use caslr::caslr::{lstsq, Pursuit};
use caslr::features::PatchRegressionSystem;
use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn subsets(k: usize, l: usize) -> Vec<Vec<usize>> {
    (0u32..1 << k).filter(|m| m.count_ones() as usize == l).map(|m| (0..k).filter(|i| m >> i & 1 == 1).collect()).collect()
}

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let (k, rows) = (8, 20);
    let truth = [1usize, 4, 6];
    let systems: Vec<PatchRegressionSystem> = (0..3)
        .map(|p| {
            let f = DMatrix::from_fn(rows, k, |_, _| rng.random_range(-1.0..1.0));
            let mut y = DVector::from_fn(rows, |_, _| 0.01 * rng.random_range(-1.0..1.0));
            for &j in &truth {
                y += f.column(j) * rng.random_range(0.5..2.0);
            }
            PatchRegressionSystem::from_parts(p, f, y)
        })
        .collect();

    let pursuit = Pursuit::new(&systems)?;
    for l in 1..k {
        let found = pursuit.run(l, None)?;
        let best = subsets(k, l)
            .iter()
            .map(|s| systems.iter().map(|sys| lstsq(&sys.features.select_columns(s), &sys.target).residual).sum::<f64>())
            .fold(f64::INFINITY, f64::min);
        println!("l = {l}: pursuit {:.4e} {:?}, exhaustive {:.4e}", found.global_error, found.support, best);
    }
    Ok(())
}
