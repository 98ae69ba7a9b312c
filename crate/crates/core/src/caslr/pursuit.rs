use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;

use super::lstsq::{lstsq, SVD_RCOND};
use super::CaslrError;
use crate::features::PatchRegressionSystem;

/// Support-refinement rounds per sparsity level.
pub const MAX_ITERATIONS: usize = 20;
/// Levels whose swap pass costs at most this much, measured as
/// `l^2 (K - l)`, are polished by exhaustive single swaps after the pursuit.
pub const SWAP_BUDGET: usize = 4096;

// relative norm below which a projected column counts as dependent
const BASIS_TOL: f64 = 1e-8;

// One patch after an orthogonal reduction: every restricted least-squares
// problem on (F, y) equals the one on (R, z) plus the constant `extra`.
struct Reduced {
    r: DMatrix<f64>,
    z: DVector<f64>,
    extra: f64,
    col_norms: Vec<f64>,
}

struct Fit {
    support: Vec<usize>,
    coefs: Vec<DVector<f64>>,
    residuals: Vec<DVector<f64>>,
    error: f64,
    rank_deficient: bool,
}

/// Outcome of the pursuit at one sparsity level.
#[derive(Debug, Clone)]
pub struct PursuitResult {
    /// Selected dictionary indices, ascending.
    pub support: Vec<usize>,
    /// Per patch, coefficients aligned with `support`, in physical units.
    pub coefficients: Vec<DVector<f64>>,
    /// Sum over patches of the squared local residuals.
    pub global_error: f64,
    pub rank_deficient: bool,
    pub iterations: usize,
}

/// Group subspace pursuit over a fixed set of patch systems. Columns are
/// scaled by their norm over all patches while selecting; reported
/// coefficients are unscaled.
pub struct Pursuit {
    k: usize,
    scales: Vec<f64>,
    patches: Vec<Reduced>,
    zero_error: f64,
}

// indices of the `count` largest scores, ties to the lowest index
fn top(scores: &[(usize, f64)], count: usize) -> Vec<usize> {
    let mut s = scores.to_vec();
    s.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
    s.into_iter().take(count).map(|(i, _)| i).collect()
}

// Drops the directions of `r` below the singular-value cutoff, leaving a
// full-row-rank system with the same restricted least-squares errors up to
// that cutoff.
// Orthonormal basis of the span of `cols`, skipping columns that are
// numerically inside the span of the earlier ones.
fn basis(m: &DMatrix<f64>, cols: &[usize]) -> Vec<DVector<f64>> {
    let mut q: Vec<DVector<f64>> = Vec::with_capacity(cols.len());
    for &j in cols {
        let c = m.column(j);
        let v = project_out(&q, c.into_owned());
        let n = v.norm();
        if n > BASIS_TOL * c.norm() && n > 0.0 {
            q.push(v / n);
        }
    }
    q
}

// `v` minus its projection on the orthonormal `q`, orthogonalized twice
fn project_out(q: &[DVector<f64>], mut v: DVector<f64>) -> DVector<f64> {
    for _ in 0..2 {
        for b in q {
            let d = b.dot(&v);
            v.axpy(-d, b, 1.0);
        }
    }
    v
}

fn truncate(r: DMatrix<f64>, z: DVector<f64>, extra: f64) -> (DMatrix<f64>, DVector<f64>, f64) {
    let svd = r.svd(true, true);
    let (u, vt) = (svd.u.expect("requested"), svd.v_t.expect("requested"));
    let smax = svd.singular_values.iter().cloned().fold(0.0, f64::max);
    let keep: Vec<usize> = (0..svd.singular_values.len()).filter(|&i| svd.singular_values[i] > SVD_RCOND * smax).collect();
    let n = vt.ncols();
    let mut b = DMatrix::zeros(keep.len(), n);
    let mut zr = DVector::zeros(keep.len());
    for (row, &i) in keep.iter().enumerate() {
        b.row_mut(row).copy_from(&(vt.row(i) * svd.singular_values[i]));
        zr[row] = u.column(i).dot(&z);
    }
    let extra = extra + (z.norm_squared() - zr.norm_squared()).max(0.0);
    (b, zr, extra)
}

impl Pursuit {
    pub fn new(systems: &[PatchRegressionSystem]) -> Result<Self, CaslrError> {
        let first = systems.first().ok_or(CaslrError::NoSystems)?;
        let k = first.cols();
        for s in systems {
            if s.cols() != k {
                return Err(CaslrError::DimensionMismatch { patch: s.patch_id, expected: k, got: s.cols() });
            }
            if s.rows() == 0 || s.target.len() != s.rows() {
                return Err(CaslrError::EmptySystem(s.patch_id));
            }
        }
        let mut scales = vec![0.0; k];
        for s in systems {
            for (j, c) in s.features.column_iter().enumerate() {
                scales[j] += c.norm_squared();
            }
        }
        let scales: Vec<f64> = scales.into_iter().map(|v| if v > 0.0 { v.sqrt() } else { 1.0 }).collect();
        let zero_error = systems.iter().map(|s| s.target.norm_squared()).sum();
        let patches = systems
            .par_iter()
            .map(|s| {
                let mut f = s.features.clone();
                for (j, mut c) in f.column_iter_mut().enumerate() {
                    c /= scales[j];
                }
                let (r, z, extra) = if s.rows() > k {
                    let qr = f.qr();
                    let mut qz = s.target.clone();
                    qr.q_tr_mul(&mut qz);
                    let z = qz.rows(0, k).into_owned();
                    let extra = qz.rows(k, s.rows() - k).norm_squared();
                    (qr.r(), z, extra)
                } else {
                    (f, s.target.clone(), 0.0)
                };
                let (r, z, extra) = truncate(r, z, extra);
                let col_norms = r.column_iter().map(|c| c.norm()).collect();
                Reduced { r, z, extra, col_norms }
            })
            .collect();
        Ok(Pursuit { k, scales, patches, zero_error })
    }

    pub fn dictionary_size(&self) -> usize {
        self.k
    }

    pub fn patch_count(&self) -> usize {
        self.patches.len()
    }

    /// Global error of the all-zero model, `sum_j ||u_t||^2`.
    pub fn zero_error(&self) -> f64 {
        self.zero_error
    }

    fn solve(&self, support: &[usize]) -> Fit {
        let per: Vec<(DVector<f64>, DVector<f64>, f64, bool)> = self
            .patches
            .par_iter()
            .map(|p| {
                let a = p.r.select_columns(support);
                let s = lstsq(&a, &p.z);
                let res = &p.z - &a * &s.coef;
                (s.coef, res, s.residual + p.extra, s.rank_deficient)
            })
            .collect();
        let error = per.iter().map(|x| x.2).sum();
        let rank_deficient = per.iter().any(|x| x.3);
        let (coefs, residuals) = per.into_iter().map(|(c, r, _, _)| (c, r)).unzip();
        Fit { support: support.to_vec(), coefs, residuals, error, rank_deficient }
    }

    // group score of each column outside the support
    fn correlations(&self, fit: &Fit) -> Vec<(usize, f64)> {
        let mut acc = vec![0.0; self.k];
        for (p, r) in self.patches.iter().zip(&fit.residuals) {
            let c = p.r.tr_mul(r);
            for j in 0..self.k {
                if p.col_norms[j] > 0.0 {
                    acc[j] += (c[j] / p.col_norms[j]).powi(2);
                }
            }
        }
        (0..self.k).filter(|j| !fit.support.contains(j)).map(|j| (j, acc[j].sqrt())).collect()
    }

    fn prune(&self, fit: &Fit, l: usize) -> Vec<usize> {
        let energy: Vec<(usize, f64)> = fit
            .support
            .iter()
            .enumerate()
            .map(|(i, &j)| (j, self.patches.iter().zip(&fit.coefs).map(|(p, c)| (c[i] * p.col_norms[j]).powi(2)).sum()))
            .collect();
        let mut s = top(&energy, l);
        s.sort_unstable();
        s
    }

    fn extend(&self, base: &[usize], l: usize) -> Vec<usize> {
        let fit = self.solve(base);
        let mut s = base.to_vec();
        s.extend(top(&self.correlations(&fit), l - base.len()));
        s.sort_unstable();
        s
    }

    fn refine(&self, start: Vec<usize>, l: usize) -> (Fit, usize) {
        let mut fit = self.solve(&start);
        let mut rounds = 0;
        while rounds < MAX_ITERATIONS {
            rounds += 1;
            let mut merged = fit.support.clone();
            merged.extend(top(&self.correlations(&fit), l));
            merged.sort_unstable();
            let candidate = self.prune(&self.solve(&merged), l);
            if candidate == fit.support {
                break;
            }
            let next = self.solve(&candidate);
            if next.error < fit.error {
                fit = next;
            } else {
                break;
            }
        }
        (fit, rounds)
    }

    // a low level with few enough neighbouring supports for a second start
    // and swap polishing
    fn small(&self, l: usize) -> bool {
        l * l * (self.k - l) <= SWAP_BUDGET
    }

    // Errors of every support that replaces one selected column by one
    // outside, from a single projection per dropped column: with `r` the
    // residual of the reduced support and `q_j` column `j` projected off
    // it, adding `j` lowers the error by `<r, f_j>^2 / |q_j|^2`.
    fn best_swap(&self, support: &[usize]) -> Option<(f64, Vec<usize>)> {
        let outside: Vec<usize> = (0..self.k).filter(|j| !support.contains(j)).collect();
        let mut best: Option<(f64, Vec<usize>)> = None;
        for i in 0..support.len() {
            let keep: Vec<usize> = support.iter().enumerate().filter(|&(a, _)| a != i).map(|(_, &j)| j).collect();
            let (base, gains) = self
                .patches
                .par_iter()
                .map(|p| {
                    let q = basis(&p.r, &keep);
                    let r = project_out(&q, p.z.clone());
                    let gains: Vec<f64> = outside
                        .iter()
                        .map(|&j| {
                            let f = p.r.column(j);
                            let qj = project_out(&q, f.into_owned());
                            let n2 = qj.norm_squared();
                            if n2 > (BASIS_TOL * p.col_norms[j]).powi(2) {
                                r.dot(&f).powi(2) / n2
                            } else {
                                0.0
                            }
                        })
                        .collect();
                    (r.norm_squared() + p.extra, gains)
                })
                .reduce(
                    || (0.0, vec![0.0; outside.len()]),
                    |(a, mut ga), (b, gb)| {
                        ga.iter_mut().zip(&gb).for_each(|(x, y)| *x += y);
                        (a + b, ga)
                    },
                );
            for (&j, g) in outside.iter().zip(&gains) {
                let e = (base - g).max(0.0);
                if best.as_ref().is_none_or(|b| e < b.0) {
                    let mut s = keep.clone();
                    s.push(j);
                    s.sort_unstable();
                    best = Some((e, s));
                }
            }
        }
        best
    }

    // exchange one selected column for one outside while that lowers the error
    fn polish(&self, mut fit: Fit, l: usize) -> Fit {
        if !self.small(l) {
            return fit;
        }
        for _ in 0..MAX_ITERATIONS {
            match self.best_swap(&fit.support) {
                Some((e, s)) if e < fit.error * (1.0 - 1e-12) => {
                    let next = self.solve(&s);
                    if next.error < fit.error * (1.0 - 1e-12) {
                        fit = next;
                    } else {
                        break;
                    }
                }
                _ => break,
            }
        }
        fit
    }

    /// Pursuit at sparsity `l`. With `warm` (a support of size below `l`)
    /// the search also starts from that support extended greedily, so the
    /// error never exceeds the warm support's.
    pub fn run(&self, l: usize, warm: Option<&[usize]>) -> Result<PursuitResult, CaslrError> {
        if l == 0 || l >= self.k {
            return Err(CaslrError::LevelOutOfRange { l, k: self.k });
        }
        let mut starts = Vec::new();
        if let Some(w) = warm.filter(|w| w.len() < l) {
            starts.push(self.extend(w, l));
        }
        if starts.is_empty() || self.small(l) {
            let cold = self.extend(&[], l);
            if !starts.contains(&cold) {
                starts.push(cold);
            }
        }
        let mut best: Option<(Fit, usize)> = None;
        for s in starts {
            let (fit, rounds) = self.refine(s, l);
            let fit = self.polish(fit, l);
            if best.as_ref().is_none_or(|(b, _)| fit.error < b.error) {
                best = Some((fit, rounds));
            }
        }
        let (fit, iterations) = best.expect("at least one start");
        let coefficients = fit
            .coefs
            .iter()
            .map(|c| DVector::from_iterator(c.len(), c.iter().zip(&fit.support).map(|(v, &j)| v / self.scales[j])))
            .collect();
        Ok(PursuitResult { support: fit.support, coefficients, global_error: fit.error, rank_deficient: fit.rank_deficient, iterations })
    }
}

/// One-shot pursuit at sparsity `l` (no warm start).
pub fn group_subspace_pursuit(systems: &[PatchRegressionSystem], l: usize) -> Result<PursuitResult, CaslrError> {
    Pursuit::new(systems)?.run(l, None)
}
