use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use super::{SolveError, TrajectoryField};

/// Adds i.i.d. Gaussian noise with standard deviation `percent/100 * std(field)`
/// to every field independently. Fields are processed in order from one
/// seeded stream, so the result is a pure function of `(traj, percent, seed)`.
pub fn add_noise(traj: &TrajectoryField, percent: f64, seed: u64) -> Result<TrajectoryField, SolveError> {
    if !(percent >= 0.0) {
        return Err(SolveError::NegativeNoise(percent));
    }
    if percent == 0.0 {
        return Ok(traj.clone());
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (grid, fields) = traj.clone().into_fields();
    let mut out = Vec::with_capacity(fields.len());
    for (name, mut arr) in fields {
        let n = arr.len() as f64;
        let mean = arr.iter().sum::<f64>() / n;
        let var = arr.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
        let sd = percent / 100.0 * var.sqrt();
        for v in arr.iter_mut() {
            let z: f64 = StandardNormal.sample(&mut rng);
            *v += sd * z;
        }
        out.push((name, arr));
    }
    let mut prov = traj.provenance().clone();
    if let serde_json::Value::Object(m) = &mut prov {
        m.insert("noise".into(), serde_json::json!({"percent": percent, "seed": seed}));
    } else {
        prov = serde_json::json!({"source": prov, "noise": {"percent": percent, "seed": seed}});
    }
    Ok(TrajectoryField::new(grid, out)?.with_provenance(prov))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::solvers::SpaceTimeGrid;
    use ndarray::{ArrayD, IxDyn};

    fn field(nx: usize, nt: usize) -> TrajectoryField {
        let g = SpaceTimeGrid::periodic_1d(nx, [0.0, 1.0], nt, [0.0, 1.0]).unwrap();
        // +-1 pattern: population std exactly 1
        let a = ArrayD::from_shape_fn(IxDyn(&[nx, nt]), |ix| if (ix[0] + ix[1]) % 2 == 0 { 1.0 } else { -1.0 });
        TrajectoryField::new(g, vec![("u".into(), a)]).unwrap()
    }

    #[test]
    fn zero_percent_is_identity_and_negative_fails() {
        let f = field(8, 4);
        assert_eq!(add_noise(&f, 0.0, 1).unwrap(), f);
        assert!(matches!(add_noise(&f, -1.0, 1), Err(SolveError::NegativeNoise(_))));
    }

    #[test]
    fn noise_level_matches_request() {
        let f = field(1000, 1000);
        let g = add_noise(&f, 5.0, 42).unwrap();
        let d: Vec<f64> = g.field(0).iter().zip(f.field(0).iter()).map(|(a, b)| a - b).collect();
        let n = d.len() as f64;
        let m = d.iter().sum::<f64>() / n;
        let sd = (d.iter().map(|v| (v - m).powi(2)).sum::<f64>() / (n - 1.0)).sqrt();
        assert!((sd - 0.05).abs() < 0.01 * 0.05, "sd = {sd}");
    }

    #[test]
    fn same_seed_same_bits() {
        let f = field(16, 16);
        let a = add_noise(&f, 3.0, 9).unwrap();
        let b = add_noise(&f, 3.0, 9).unwrap();
        assert!(a.field(0).iter().zip(b.field(0).iter()).all(|(x, y)| x.to_bits() == y.to_bits()));
        let c = add_noise(&f, 3.0, 10).unwrap();
        assert_ne!(a, c);
    }
}
