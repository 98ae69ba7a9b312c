use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use super::lstsq::lstsq;
use crate::expr::Expr;
use crate::features::PatchRegressionSystem;

/// Coefficients refitted on one patch.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PatchCoefficients {
    pub patch_id: usize,
    /// `(x, y, t)` of the patch center.
    pub center: (f64, f64, f64),
    /// Aligned with the support the table was built for.
    pub values: Vec<f64>,
    pub rank_deficient: bool,
}

/// Local least squares on `support` for every patch, in physical units.
pub fn reconstruct_coefficients(support: &[usize], systems: &[PatchRegressionSystem]) -> Vec<PatchCoefficients> {
    systems
        .iter()
        .map(|s| {
            let sol = lstsq(&s.features.select_columns(support), &s.target);
            PatchCoefficients {
                patch_id: s.patch_id,
                center: s.center_position,
                values: sol.coef.iter().cloned().collect(),
                rank_deficient: sol.rank_deficient,
            }
        })
        .collect()
}

/// `|A n B| / |A u B|`, one for two empty sets.
pub fn jaccard(a: &[usize], b: &[usize]) -> f64 {
    jaccard_sets(&a.iter().collect(), &b.iter().collect())
}

/// Jaccard score of a system, where each equation contributes its
/// `(equation, feature)` pairs.
pub fn jaccard_system(truth: &[Vec<usize>], found: &[Vec<usize>]) -> f64 {
    let pairs = |s: &[Vec<usize>]| -> BTreeSet<(usize, usize)> {
        s.iter().enumerate().flat_map(|(e, fs)| fs.iter().map(move |&f| (e, f))).collect()
    };
    jaccard_sets(&pairs(truth), &pairs(found))
}

fn jaccard_sets<T: Ord>(a: &BTreeSet<T>, b: &BTreeSet<T>) -> f64 {
    let union = a.union(b).count();
    if union == 0 {
        return 1.0;
    }
    a.intersection(b).count() as f64 / union as f64
}

/// Coefficient reconstruction error over all patch centers.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CoefficientError {
    pub value: f64,
    /// False when the true coefficients vanish at every center and `value`
    /// is the absolute error.
    pub relative: bool,
}

/// `||c_hat - c_true|| / ||c_true||` over every patch center and every
/// feature in either support. Missing features count as zero.
pub fn coefficient_error(table: &[PatchCoefficients], support: &[usize], truth: &[(usize, Expr)]) -> CoefficientError {
    let mut num = 0.0;
    let mut den = 0.0;
    for row in table {
        let (x, y, t) = row.center;
        let features: BTreeSet<usize> = support.iter().chain(truth.iter().map(|(k, _)| k)).cloned().collect();
        for k in features {
            let found = support.iter().position(|&j| j == k).map_or(0.0, |i| row.values[i]);
            let exact: f64 = truth.iter().filter(|(j, _)| *j == k).map(|(_, c)| c.eval(x, y, t)).sum();
            num += (found - exact).powi(2);
            den += exact * exact;
        }
    }
    if den > 0.0 {
        CoefficientError { value: (num / den).sqrt(), relative: true }
    } else {
        CoefficientError { value: num.sqrt(), relative: false }
    }
}
