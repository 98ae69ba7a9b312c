use nalgebra::{DMatrix, SymmetricEigen};

use super::PatchError;
use crate::features::{multi_indices, PatchRegressionSystem};

/// Upper 90% standard normal quantile.
pub const VARIATION_QUANTILE: f64 = 1.644853;

const MAX_PAIR_POINTS: usize = 200;

/// Root-mean-square of all pure spatial derivatives `1 <= |alpha| <= p_max`
/// of every field over the patch.
pub fn sobolev_seminorm(sys: &PatchRegressionSystem, p_max: usize) -> Result<f64, PatchError> {
    let m = sys.rows();
    if m == 0 {
        return Err(PatchError::Empty);
    }
    let mut total = 0.0;
    for f in 0..sys.values.len() {
        for a in multi_indices(sys.space_dim, p_max).into_iter().skip(1) {
            let col = sys
                .derivatives
                .iter()
                .find(|(g, b, _)| *g == f && *b == a)
                .ok_or_else(|| PatchError::MissingDerivatives(format!("field {f}, alpha {a:?}")))?;
            total += col.2.iter().map(|v| v * v).sum::<f64>();
        }
    }
    Ok((total / m as f64).sqrt())
}

/// Keep mask dropping seminorms outside the [1st, 99th] percentile band.
/// Percentiles are `sorted[k]` and `sorted[n - 1 - k]` with
/// `k = floor(n / 100)`; lists of one or two values keep everything.
pub fn filter_by_sobolev(betas: &[f64]) -> Vec<bool> {
    let n = betas.len();
    if n <= 2 {
        return vec![true; n];
    }
    let mut sorted = betas.to_vec();
    sorted.sort_by(f64::total_cmp);
    let k = n / 100;
    let (lo, hi) = (sorted[k], sorted[n - 1 - k]);
    betas.iter().map(|&b| b >= lo && b <= hi).collect()
}

/// Whether a patch shows variation beyond what noise of level `sigma_hat`
/// explains. `fields[j]` holds field `j` at the patch points. With several
/// fields a pair of points counts only if every field differs by more than
/// the threshold.
pub fn variation_test(fields: &[Vec<f64>], sigma_hat: f64) -> Result<bool, PatchError> {
    if !(sigma_hat >= 0.0) {
        return Err(PatchError::NegativeSigma(sigma_hat));
    }
    let m = fields.first().map_or(0, |f| f.len());
    if m == 0 || fields.iter().any(|f| f.len() != m) {
        return Err(PatchError::Empty);
    }
    let thr = std::f64::consts::SQRT_2 * VARIATION_QUANTILE * sigma_hat;
    if fields.len() == 1 {
        let (lo, hi) = fields[0].iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(l, h), &v| (l.min(v), h.max(v)));
        return Ok(hi - lo > thr);
    }
    let pts: Vec<usize> = if m <= MAX_PAIR_POINTS { (0..m).collect() } else { (0..MAX_PAIR_POINTS).map(|i| i * m / MAX_PAIR_POINTS).collect() };
    for (a, &p) in pts.iter().enumerate() {
        for &q in &pts[a + 1..] {
            if fields.iter().all(|f| (f[p] - f[q]).abs() > thr) {
                return Ok(true);
            }
        }
    }
    Ok(false)
}

/// Feature correlation matrix of a patch and its extreme eigenvalues.
#[derive(Debug, Clone)]
pub struct ConditionDiagnostic {
    /// `M[k][k']`, a quadrature of the integral of `f_k f_k'` over the patch.
    pub m: DMatrix<f64>,
    pub lambda_max: f64,
    pub lambda_min: f64,
    /// `lambda_min / lambda_max`, zero when all features vanish.
    pub ratio: f64,
}

pub fn condition_diagnostic(sys: &PatchRegressionSystem) -> ConditionDiagnostic {
    let f = &sys.features;
    let mut m = f.transpose() * f * sys.cell_volume;
    m = (&m + m.transpose()) * 0.5;
    let eig = SymmetricEigen::new(m.clone()).eigenvalues;
    let lambda_max = eig.iter().cloned().fold(0.0, f64::max);
    let lambda_min = eig.iter().cloned().fold(f64::INFINITY, f64::min).max(0.0);
    let ratio = if lambda_max > 0.0 { (lambda_min / lambda_max).clamp(0.0, 1.0) } else { 0.0 };
    ConditionDiagnostic { m, lambda_max, lambda_min, ratio }
}

/// Whether the sufficient identifiability condition `K > 2 L R / eps` holds,
/// with `K` estimated by the square root of the eigenvalue ratio.
pub fn identifiable(diag: &ConditionDiagnostic, lipschitz: f64, radius: f64, eps: f64) -> bool {
    diag.ratio.sqrt() > 2.0 * lipschitz * radius / eps
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::features::{assemble_patch_system, Dictionary, FdCache};
    use crate::patches::Patch;
    use crate::solvers::{Node, SpaceTimeGrid, TrajectoryField};
    use nalgebra::DVector;
    use ndarray::{ArrayD, IxDyn};
    use proptest::prelude::*;

    fn sine_system(n: usize, scale: f64, dict: &[&str]) -> PatchRegressionSystem {
        let g = SpaceTimeGrid::periodic_1d(n, [0.0, std::f64::consts::TAU], 9, [0.0, 1.0]).unwrap();
        let a = ArrayD::from_shape_fn(IxDyn(&[n, 9]), |ix| scale * g.coord(0, ix[0]).sin());
        let tr = TrajectoryField::new(g.clone(), vec![("u".into(), a)]).unwrap();
        let d = Dictionary::from_strings(dict).unwrap();
        let cache = FdCache::new(&tr, &d, 2).unwrap();
        // radius n/2 - 1 in a periodic grid of n points covers all but one node
        let p = Patch::new(0, &g, Node::new_1d(n / 2, 4), [n / 2 - 1, 0], 0).unwrap();
        assemble_patch_system(&cache, &p, &d, 0, 2).unwrap()
    }

    #[test]
    fn sobolev_of_sine_is_one() {
        let s = sine_system(400, 1.0, &["u"]);
        assert!((sobolev_seminorm(&s, 2).unwrap() - 1.0).abs() < 1e-2);
        let s2 = sine_system(400, 2.0, &["u"]);
        let ratio = sobolev_seminorm(&s2, 2).unwrap() / sobolev_seminorm(&s, 2).unwrap();
        assert!((ratio - 2.0).abs() < 1e-12);
        assert_eq!(sobolev_seminorm(&sine_system(40, 0.0, &["u"]), 2).unwrap(), 0.0);
        assert!(matches!(sobolev_seminorm(&s, 3), Err(PatchError::MissingDerivatives(_))));
    }

    #[test]
    fn percentile_band() {
        let betas: Vec<f64> = (0..100).map(|i| ((i * 37) % 100) as f64).collect();
        let keep = filter_by_sobolev(&betas);
        let dropped: Vec<f64> = betas.iter().zip(&keep).filter(|(_, k)| !**k).map(|(b, _)| *b).collect();
        assert_eq!(dropped.len(), 2);
        assert!(dropped.contains(&0.0) && dropped.contains(&99.0));
        assert!(filter_by_sobolev(&[3.0; 50]).iter().all(|&k| k));
        assert_eq!(filter_by_sobolev(&[1.0]), vec![true]);
    }

    #[test]
    fn variation_examples() {
        assert!(!variation_test(&[vec![1.0; 10]], 0.5).unwrap());
        assert!(variation_test(&[vec![0.0, 10.0]], 0.1).unwrap());
        assert!(variation_test(&[vec![0.0, 1e-12]], 0.0).unwrap());
        // threshold constant
        let thr = 2f64.sqrt() * 1.644853 * 0.1;
        assert!((thr - 0.2326).abs() < 1e-4);
        assert!(!variation_test(&[vec![0.0, 0.23]], 0.1).unwrap());
        assert!(variation_test(&[vec![0.0, 0.233]], 0.1).unwrap());
        // multi-field: one flat field vetoes every pair
        assert!(!variation_test(&[vec![0.0, 10.0], vec![1.0, 1.0]], 0.1).unwrap());
        assert!(variation_test(&[vec![0.0, 10.0], vec![1.0, -1.0]], 0.1).unwrap());
        assert!(variation_test(&[vec![]], 0.1).is_err());
        assert!(variation_test(&[vec![1.0]], -1.0).is_err());
    }

    fn system_from(f: DMatrix<f64>) -> PatchRegressionSystem {
        let m = f.nrows();
        PatchRegressionSystem::from_parts(0, f, DVector::zeros(m))
    }

    #[test]
    fn condition_examples() {
        let zero = condition_diagnostic(&system_from(DMatrix::zeros(5, 3)));
        assert_eq!(zero.ratio, 0.0);
        assert!(zero.m.iter().all(|&v| v == 0.0));
        let mut q = DMatrix::zeros(4, 2);
        q[(0, 0)] = 1.0;
        q[(1, 1)] = 1.0;
        let id = condition_diagnostic(&system_from(q));
        assert!((id.m.clone() - DMatrix::identity(2, 2)).norm() < 1e-15);
        assert!((id.ratio - 1.0).abs() < 1e-15);

        let s = sine_system(200, 1.0, &["u", "u_x"]);
        let d = condition_diagnostic(&s);
        let vol = s.cell_volume * s.rows() as f64;
        assert!((d.m[(0, 0)] / vol - 0.5).abs() < 2e-2);
        assert!((d.m[(1, 1)] / vol - 0.5).abs() < 2e-2);
        assert!(d.m[(0, 1)].abs() / vol < 2e-2);
        assert!(d.ratio > 0.9);
        assert!(identifiable(&d, 1.0, 0.1, 1.0));
        assert!(!identifiable(&d, 1.0, 0.1, 0.1));
    }

    proptest! {
        #[test]
        fn variation_shift_and_scale_invariant(
            vals in proptest::collection::vec(-5.0f64..5.0, 2..30),
            shift in -100.0f64..100.0,
            c in 0.1f64..10.0,
            sigma in 0.0f64..2.0,
        ) {
            let base = variation_test(&[vals.clone()], sigma).unwrap();
            let shifted: Vec<f64> = vals.iter().map(|v| v + shift).collect();
            let scaled: Vec<f64> = vals.iter().map(|v| v * c).collect();
            let thr = std::f64::consts::SQRT_2 * VARIATION_QUANTILE * sigma;
            let (lo, hi) = vals.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(l, h), &v| (l.min(v), h.max(v)));
            // skip knife-edge cases where roundoff in the shift decides
            prop_assume!(((hi - lo) - thr).abs() > 1e-9 * (1.0 + shift.abs()));
            prop_assert_eq!(variation_test(&[shifted], sigma).unwrap(), base);
            prop_assert_eq!(variation_test(&[scaled], sigma * c).unwrap(), base);
        }

        #[test]
        fn sobolev_filter_is_a_small_subset(betas in proptest::collection::hash_set(0u32..1_000_000, 1..400)) {
            let betas: Vec<f64> = betas.into_iter().map(f64::from).collect();
            let keep = filter_by_sobolev(&betas);
            prop_assert_eq!(keep.len(), betas.len());
            let dropped = keep.iter().filter(|k| !**k).count();
            prop_assert!(dropped as f64 <= 0.02 * betas.len() as f64);
        }

        #[test]
        fn condition_ratio_is_scale_invariant_for_homogeneous_dictionaries(
            amp in 0.1f64..10.0, phase in 0.0f64..6.0,
        ) {
            let n = 32;
            let g = SpaceTimeGrid::periodic_1d(n, [0.0, std::f64::consts::TAU], 9, [0.0, 1.0]).unwrap();
            let make = |s: f64| {
                let a = ArrayD::from_shape_fn(IxDyn(&[n, 9]), |ix| s * ((g.coord(0, ix[0]) + phase).sin() + 0.3 * (2.0 * g.coord(0, ix[0])).cos()));
                let tr = TrajectoryField::new(g.clone(), vec![("u".into(), a)]).unwrap();
                let d = Dictionary::from_strings(&["u*u", "u*u_x", "u_x*u_x"]).unwrap();
                let cache = FdCache::new(&tr, &d, 0).unwrap();
                let p = Patch::new(0, &g, Node::new_1d(10, 4), [5, 0], 2).unwrap();
                condition_diagnostic(&assemble_patch_system(&cache, &p, &d, 0, 0).unwrap()).ratio
            };
            let (r1, r2) = (make(1.0), make(amp));
            prop_assert!((r1 - r2).abs() <= 1e-8 * r1.max(1e-300) + 1e-14, "{} vs {}", r1, r2);
        }
    }
}
