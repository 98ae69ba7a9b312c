use nalgebra::{DMatrix, DVector};

/// Relative size of the smallest triangular pivot below which the QR path
/// gives way to the SVD.
pub const QR_PIVOT_TOLERANCE: f64 = 1e-8;
/// Singular values below this fraction of the largest are treated as zero.
pub const SVD_RCOND: f64 = 1e-10;

/// Least-squares (or minimum-norm) solution of `A c ~ b`.
#[derive(Debug, Clone)]
pub struct LstsqSolution {
    pub coef: DVector<f64>,
    /// `||A c - b||^2`
    pub residual: f64,
    /// The SVD fallback was needed.
    pub rank_deficient: bool,
}

fn pivots_ok(r: &DMatrix<f64>) -> bool {
    let n = r.nrows().min(r.ncols());
    let d: Vec<f64> = (0..n).map(|i| r[(i, i)].abs()).collect();
    let max = d.iter().cloned().fold(0.0, f64::max);
    max > 0.0 && d.iter().all(|&v| v > QR_PIVOT_TOLERANCE * max)
}

fn residual(a: &DMatrix<f64>, b: &DVector<f64>, c: &DVector<f64>) -> f64 {
    (a * c - b).norm_squared()
}

/// Householder QR for full-rank systems (the transpose for wide ones,
/// giving the minimum-norm solution), SVD pseudo-inverse otherwise.
pub fn lstsq(a: &DMatrix<f64>, b: &DVector<f64>) -> LstsqSolution {
    let (m, n) = a.shape();
    if n == 0 {
        return LstsqSolution { coef: DVector::zeros(0), residual: b.norm_squared(), rank_deficient: false };
    }
    if m >= n {
        let qr = a.clone().qr();
        let r = qr.r();
        if pivots_ok(&r) {
            let mut rhs = b.clone();
            qr.q_tr_mul(&mut rhs);
            if let Some(c) = r.solve_upper_triangular(&rhs.rows(0, n).into_owned()) {
                let res = residual(a, b, &c);
                return LstsqSolution { coef: c, residual: res, rank_deficient: false };
            }
        }
    } else {
        // A^T = Q R, A = R^T Q^T, minimum-norm c = Q R^-T b
        let qr = a.transpose().qr();
        let r = qr.r();
        if pivots_ok(&r) {
            if let Some(w) = r.tr_solve_upper_triangular(b) {
                let c = qr.q() * w;
                let res = residual(a, b, &c);
                return LstsqSolution { coef: c, residual: res, rank_deficient: false };
            }
        }
    }
    let svd = a.clone().svd(true, true);
    let smax = svd.singular_values.iter().cloned().fold(0.0, f64::max);
    let c = if smax > 0.0 {
        svd.solve(b, SVD_RCOND * smax).expect("both factors were computed")
    } else {
        DVector::zeros(n)
    };
    let res = residual(a, b, &c);
    LstsqSolution { coef: c, residual: res, rank_deficient: true }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn square_tall_and_wide() {
        let a = DMatrix::from_row_slice(3, 2, &[1.0, 0.0, 0.0, 1.0, 1.0, 1.0]);
        let b = DVector::from_vec(vec![1.0, 2.0, 0.0]);
        let s = lstsq(&a, &b);
        // normal equations [[2,1],[1,2]] c = [1,2]
        assert!((s.coef[0] - 0.0).abs() < 1e-14 && (s.coef[1] - 1.0).abs() < 1e-14);
        assert!((s.residual - 3.0).abs() < 1e-13);
        assert!(!s.rank_deficient);

        let w = DMatrix::from_row_slice(1, 2, &[3.0, 4.0]);
        let s = lstsq(&w, &DVector::from_vec(vec![5.0]));
        assert!((s.coef[0] - 0.6).abs() < 1e-14 && (s.coef[1] - 0.8).abs() < 1e-14);
        assert!(s.residual < 1e-28);

        let one = lstsq(&DMatrix::from_element(1, 1, 4.0), &DVector::from_element(1, 2.0));
        assert_eq!(one.coef[0], 0.5);
    }

    #[test]
    fn rank_deficient_gives_minimum_norm() {
        let a = DMatrix::from_row_slice(3, 2, &[1.0, 1.0, 2.0, 2.0, 3.0, 3.0]);
        let b = DVector::from_vec(vec![2.0, 4.0, 6.0]);
        let s = lstsq(&a, &b);
        assert!(s.rank_deficient);
        assert!((s.coef[0] - 1.0).abs() < 1e-12 && (s.coef[1] - 1.0).abs() < 1e-12);
        let z = lstsq(&DMatrix::zeros(4, 3), &DVector::from_element(4, 1.0));
        assert!(z.coef.iter().all(|&v| v == 0.0));
        assert!((z.residual - 4.0).abs() < 1e-15);
    }

    proptest! {
        #[test]
        fn residual_orthogonal_to_columns(vals in proptest::collection::vec(-1.0f64..1.0, 8 * 3 + 8)) {
            let a = DMatrix::from_column_slice(8, 3, &vals[..24]);
            let b = DVector::from_column_slice(&vals[24..]);
            let s = lstsq(&a, &b);
            let g = a.tr_mul(&(&a * &s.coef - &b));
            prop_assert!(g.amax() < 1e-10);
        }
    }
}
