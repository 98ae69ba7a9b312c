use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use super::{Patch, PatchError};
use crate::solvers::{Node, SpaceTimeGrid, TrajectoryField};

/// Noise variance estimate from `n` non-intersecting patches of `b` points,
/// with the bias and variance bounds for the given Lipschitz constant.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct NoiseEstimate {
    pub sigma2_hat: f64,
    pub n: usize,
    pub b: usize,
    pub lipschitz: f64,
    /// Largest physical half-width of the boxes.
    pub radius: f64,
    /// Space-time dimension `d + 1`.
    pub dimension: usize,
    pub bias_bound: f64,
    /// Variance bound evaluated at `sigma2_hat`.
    pub variance_bound: f64,
}

impl NoiseEstimate {
    pub fn sigma_hat(&self) -> f64 {
        self.sigma2_hat.sqrt()
    }

    pub fn gamma(&self) -> f64 {
        4.0 * self.dimension as f64 * (self.lipschitz * self.radius).powi(2)
    }

    /// `2 s^4 / (N - 1) + N B s^2 gamma / ((N - 1)^2 (B - 1))` at `s^2 = sigma2`.
    pub fn variance_bound_at(n: usize, b: usize, sigma2: f64, gamma: f64) -> f64 {
        let (n, b) = (n as f64, b as f64);
        2.0 * sigma2 * sigma2 / (n - 1.0) + n * b * sigma2 * gamma / ((n - 1.0).powi(2) * (b - 1.0))
    }
}

/// Up to `count` pairwise disjoint boxes tiling the grid, picked at evenly
/// spaced positions in the (time, y, x) enumeration of all tiles.
pub fn noise_patches(grid: &SpaceTimeGrid, count: usize, radius: [usize; 2], time_radius: usize) -> Result<Vec<Patch>, PatchError> {
    let d = grid.space_dim();
    let tiles_on = |n: usize, r: usize| n / (2 * r + 1);
    let per_axis: Vec<usize> = (0..d).map(|a| tiles_on(grid.space_points()[a], radius[a])).collect();
    let nt = tiles_on(grid.time_points(), time_radius);
    let ny = if d > 1 { per_axis[1] } else { 1 };
    let total = per_axis[0] * ny * nt;
    if total < count {
        return Err(PatchError::NoRoom { fit: total, wanted: count });
    }
    (0..count)
        .map(|i| {
            let t = i * total / count;
            let (ix, rest) = (t % per_axis[0], t / per_axis[0]);
            let (iy, it) = (rest % ny, rest / ny);
            let c = |k: usize, r: usize| k * (2 * r + 1) + r;
            let center = Node { space: [c(ix, radius[0]), if d > 1 { c(iy, radius[1]) } else { 0 }], time: c(it, time_radius) };
            Patch::new(i, grid, center, radius, time_radius)
        })
        .collect()
}

/// Largest central-difference gradient magnitude of a field over the
/// nodes of the given patches.
pub fn lipschitz_estimate(traj: &TrajectoryField, field: usize, patches: &[Patch]) -> f64 {
    let grid = traj.grid();
    let d = grid.space_dim();
    let nt = grid.time_points();
    let mut best = 0.0f64;
    for p in patches {
        for n in p.nodes() {
            let mut g2 = 0.0;
            for a in 0..=d {
                let (lo, hi) = if a < d {
                    let i = n.space[a] as isize;
                    (grid.wrap(a, i - 1), grid.wrap(a, i + 1))
                } else {
                    (n.time.checked_sub(1), Some(n.time + 1).filter(|&k| k < nt))
                };
                let at = |k: usize| {
                    let mut m = *n;
                    if a < d {
                        m.space[a] = k;
                    } else {
                        m.time = k;
                    }
                    traj.value(field, &m)
                };
                let here = if a < d { n.space[a] } else { n.time };
                let h = grid.spacing(a);
                let slope = match (lo, hi) {
                    (Some(l), Some(u)) => (at(u) - at(l)) / (2.0 * h),
                    (Some(l), None) => (at(here) - at(l)) / h,
                    (None, Some(u)) => (at(u) - at(here)) / h,
                    (None, None) => 0.0,
                };
                g2 += slope * slope;
            }
            best = best.max(g2.sqrt());
        }
    }
    best
}

/// Noise variance of field `field` from pairwise disjoint patches of equal
/// size. `lipschitz` feeds only the bounds; without it the largest
/// finite-difference gradient over the patches is used.
pub fn estimate_noise_variance(
    traj: &TrajectoryField,
    field: usize,
    patches: &[Patch],
    lipschitz: Option<f64>,
) -> Result<NoiseEstimate, PatchError> {
    if field >= traj.field_count() {
        return Err(PatchError::UnknownField(field));
    }
    let n = patches.len();
    if n < 2 {
        return Err(PatchError::TooFew { what: "patches", needed: 2, got: n });
    }
    let b = patches[0].len();
    if b < 2 {
        return Err(PatchError::TooFew { what: "points per patch", needed: 2, got: b });
    }
    let mut owner: HashMap<Node, usize> = HashMap::with_capacity(n * b);
    for p in patches {
        if p.len() != b {
            return Err(PatchError::MismatchedCardinality { id: p.id, got: p.len(), expected: b });
        }
        for node in p.nodes() {
            if let Some(&other) = owner.get(node) {
                if other != p.id {
                    return Err(PatchError::Intersecting(other, p.id));
                }
            }
            owner.insert(*node, p.id);
        }
    }
    let zeta: Vec<f64> = patches
        .iter()
        .map(|p| {
            let mean = p.nodes().iter().map(|node| traj.value(field, node)).sum::<f64>() / b as f64;
            traj.value(field, &p.center) - mean
        })
        .collect();
    let zbar = zeta.iter().sum::<f64>() / n as f64;
    let ss: f64 = zeta.iter().map(|z| (z - zbar).powi(2)).sum();
    let (nf, bf) = (n as f64, b as f64);
    let sigma2_hat = bf * ss / ((nf - 1.0) * (bf - 1.0));

    let grid = traj.grid();
    let d = grid.space_dim();
    let radius = patches
        .iter()
        .map(|p| (0..d).map(|a| p.radius[a] as f64 * grid.dx(a)).fold(p.time_radius as f64 * grid.dt(), f64::max))
        .fold(0.0, f64::max);
    let lipschitz = lipschitz.unwrap_or_else(|| lipschitz_estimate(traj, field, patches));
    let dimension = d + 1;
    let bias_bound = dimension as f64 * nf * bf * (lipschitz * radius).powi(2) / ((nf - 1.0) * (bf - 1.0));
    let mut est = NoiseEstimate { sigma2_hat, n, b, lipschitz, radius, dimension, bias_bound, variance_bound: 0.0 };
    est.variance_bound = NoiseEstimate::variance_bound_at(n, b, sigma2_hat, est.gamma());
    Ok(est)
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::{ArrayD, IxDyn};
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_distr::{Distribution, Normal};

    fn constant(g: &SpaceTimeGrid, c: f64) -> TrajectoryField {
        TrajectoryField::new(g.clone(), vec![("u".into(), ArrayD::from_elem(IxDyn(&g.shape()), c))]).unwrap()
    }

    #[test]
    fn placement_is_disjoint_and_sized() {
        let g = SpaceTimeGrid::periodic_1d(100, [0.0, 1.0], 200, [0.0, 1.0]).unwrap();
        let p = noise_patches(&g, 200, [3, 0], 3).unwrap();
        assert_eq!(p.len(), 200);
        assert!(p.iter().all(|q| q.len() == 49));
        let mut seen = std::collections::HashSet::new();
        assert!(p.iter().flat_map(|q| q.nodes()).all(|n| seen.insert(*n)));
        assert!(matches!(noise_patches(&g, 1000, [3, 0], 3), Err(PatchError::NoRoom { .. })));
    }

    #[test]
    fn noiseless_constant_is_zero() {
        let g = SpaceTimeGrid::periodic_1d(50, [0.0, 1.0], 50, [0.0, 1.0]).unwrap();
        let p = noise_patches(&g, 20, [2, 0], 2).unwrap();
        let e = estimate_noise_variance(&constant(&g, 4.2), 0, &p, None).unwrap();
        assert!(e.sigma2_hat.abs() < 1e-28);
        assert_eq!(e.lipschitz, 0.0);
        assert_eq!(e.bias_bound, 0.0);
    }

    #[test]
    fn rejects_bad_patch_sets() {
        let g = SpaceTimeGrid::periodic_1d(50, [0.0, 1.0], 50, [0.0, 1.0]).unwrap();
        let tr = constant(&g, 0.0);
        let a = Patch::new(0, &g, Node::new_1d(10, 10), [2, 0], 2).unwrap();
        let b = Patch::new(1, &g, Node::new_1d(12, 11), [2, 0], 2).unwrap();
        let c = Patch::new(2, &g, Node::new_1d(30, 30), [1, 0], 2).unwrap();
        assert!(matches!(estimate_noise_variance(&tr, 0, &[a.clone(), b], None), Err(PatchError::Intersecting(0, 1))));
        assert!(matches!(estimate_noise_variance(&tr, 0, &[a.clone(), c], None), Err(PatchError::MismatchedCardinality { .. })));
        assert!(matches!(estimate_noise_variance(&tr, 0, &[a], None), Err(PatchError::TooFew { .. })));
    }

    #[test]
    fn bounds_follow_formulas() {
        let g = SpaceTimeGrid::periodic_1d(60, [0.0, 6.0], 60, [0.0, 6.0]).unwrap();
        let p = noise_patches(&g, 10, [2, 0], 1).unwrap();
        let e = estimate_noise_variance(&constant(&g, 1.0), 0, &p, Some(3.0)).unwrap();
        // dx = dt = 0.1, R = max(0.2, 0.1)
        assert!((e.radius - 0.2).abs() < 1e-15);
        let want = 2.0 * 10.0 * 15.0 * 9.0 * 0.04 / (9.0 * 14.0);
        assert!((e.bias_bound - want).abs() < 1e-12);
        assert!((e.gamma() - 4.0 * 2.0 * 9.0 * 0.04).abs() < 1e-12);
    }

    #[test]
    fn lipschitz_of_linear_field() {
        let g = SpaceTimeGrid::new(vec![40], 40, vec![[0.0, 4.0]], [0.0, 4.0], vec![false]).unwrap();
        let a = ArrayD::from_shape_fn(IxDyn(&[40, 40]), |ix| 3.0 * g.coord(0, ix[0]) + 4.0 * g.time(ix[1]));
        let tr = TrajectoryField::new(g.clone(), vec![("u".into(), a)]).unwrap();
        let p = noise_patches(&g, 4, [2, 0], 2).unwrap();
        assert!((lipschitz_estimate(&tr, 0, &p) - 5.0).abs() < 1e-9);
    }

    #[test]
    fn roughly_unbiased_on_pure_noise() {
        let g = SpaceTimeGrid::periodic_1d(100, [0.0, 1.0], 200, [0.0, 1.0]).unwrap();
        let p = noise_patches(&g, 200, [3, 0], 3).unwrap();
        let normal = Normal::new(0.0, 0.1).unwrap();
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
        let mut sum = 0.0;
        let reps = 20;
        for _ in 0..reps {
            let a = ArrayD::from_shape_fn(IxDyn(&g.shape()), |_| normal.sample(&mut rng));
            let tr = TrajectoryField::new(g.clone(), vec![("u".into(), a)]).unwrap();
            sum += estimate_noise_variance(&tr, 0, &p, Some(0.0)).unwrap().sigma2_hat;
        }
        // 20 repetitions of an estimator with relative sd 0.1: mean within 10%
        assert!((sum / reps as f64 - 0.01).abs() < 1e-3);
    }

    proptest! {
        #[test]
        fn invariant_under_global_shift(seed in 0u64..1000, shift in -50.0f64..50.0) {
            let g = SpaceTimeGrid::periodic_1d(30, [0.0, 1.0], 30, [0.0, 1.0]).unwrap();
            let p = noise_patches(&g, 9, [2, 0], 2).unwrap();
            let normal = Normal::new(0.0, 1.0).unwrap();
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
            let a = ArrayD::from_shape_fn(IxDyn(&g.shape()), |_| normal.sample(&mut rng));
            let b = a.mapv(|v| v + shift);
            let e1 = estimate_noise_variance(&TrajectoryField::new(g.clone(), vec![("u".into(), a)]).unwrap(), 0, &p, Some(1.0)).unwrap();
            let e2 = estimate_noise_variance(&TrajectoryField::new(g.clone(), vec![("u".into(), b)]).unwrap(), 0, &p, Some(1.0)).unwrap();
            prop_assert!((e1.sigma2_hat - e2.sigma2_hat).abs() < 1e-10 * (1.0 + shift.abs()));
            prop_assert!(e1.sigma2_hat >= 0.0);
        }
    }
}
