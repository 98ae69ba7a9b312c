use std::io::Write;

use nalgebra::DMatrix;
use ndarray::Axis;
use serde::{Deserialize, Serialize};

use super::SpectralError;
use crate::solvers::TrajectoryField;

/// How singular-value thresholds are read.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ThresholdMode {
    /// As a fraction of the largest singular value.
    #[default]
    Relative,
    Absolute,
}

/// Singular spectrum of a snapshot matrix restricted to a time window.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SvdReport {
    /// Descending.
    pub singular_values: Vec<f64>,
    /// `(threshold, number of singular values at or above it)`.
    pub counts: Vec<(f64, usize)>,
    pub mode: ThresholdMode,
    /// First and last grid time inside the window.
    pub window: (f64, f64),
    /// `(space points, time points)` of the snapshot matrix.
    pub shape: (usize, usize),
}

impl SvdReport {
    pub fn count(&self, threshold: f64) -> usize {
        dominant_count(&self.singular_values, threshold, self.mode)
    }

    /// `index,singular_value,cumulative_energy`, energy as the running
    /// fraction of `sum sigma^2`.
    pub fn write_csv<W: Write>(&self, w: &mut W) -> Result<(), SpectralError> {
        writeln!(w, "index,singular_value,cumulative_energy")?;
        let total: f64 = self.singular_values.iter().map(|s| s * s).sum();
        let mut acc = 0.0;
        for (i, s) in self.singular_values.iter().enumerate() {
            acc += s * s;
            writeln!(w, "{},{},{}", i + 1, s, if total > 0.0 { acc / total } else { 0.0 })?;
        }
        Ok(())
    }

    pub fn write_counts_csv<W: Write>(&self, w: &mut W) -> Result<(), SpectralError> {
        writeln!(w, "threshold,count,fraction")?;
        let n = self.singular_values.len().max(1) as f64;
        for &(t, c) in &self.counts {
            writeln!(w, "{},{},{}", t, c, c as f64 / n)?;
        }
        Ok(())
    }
}

/// Descending singular values.
pub fn singular_values(m: &DMatrix<f64>) -> Vec<f64> {
    if m.is_empty() {
        return Vec::new();
    }
    // the bidiagonalization is cheaper on the wide orientation's transpose
    let sv = if m.nrows() < m.ncols() { m.transpose().svd(false, false) } else { m.clone().svd(false, false) };
    let mut v: Vec<f64> = sv.singular_values.iter().map(|s| s.max(0.0)).collect();
    v.sort_by(|a, b| b.total_cmp(a));
    v
}

/// Number of singular values at or above `threshold` (scaled by the
/// largest one in relative mode).
pub fn dominant_count(sv: &[f64], threshold: f64, mode: ThresholdMode) -> usize {
    let cut = match mode {
        ThresholdMode::Relative => threshold * sv.first().copied().unwrap_or(0.0),
        ThresholdMode::Absolute => threshold,
    };
    sv.iter().filter(|&&s| s >= cut).count()
}

/// `u_{jk} = u(x_j, t_k)` for the grid times in the closed window, space
/// flattened row-major in 2D. Returns the matrix and the first and last
/// times used.
pub fn snapshot_matrix(traj: &TrajectoryField, field: usize, window: (f64, f64)) -> Result<(DMatrix<f64>, (f64, f64)), SpectralError> {
    if field >= traj.field_count() {
        return Err(SpectralError::UnknownField(field));
    }
    let grid = traj.grid();
    let tol = 1e-9 * grid.dt();
    let ks: Vec<usize> = (0..grid.time_points()).filter(|&k| grid.time(k) >= window.0 - tol && grid.time(k) <= window.1 + tol).collect();
    if ks.is_empty() {
        return Err(SpectralError::EmptyWindow(window.0, window.1));
    }
    let arr = traj.field(field);
    let time_axis = Axis(grid.space_dim());
    let ns = grid.space_len();
    let mut m = DMatrix::zeros(ns, ks.len());
    for (c, &k) in ks.iter().enumerate() {
        let snap = arr.index_axis(time_axis, k);
        for (r, v) in snap.iter().enumerate() {
            m[(r, c)] = *v;
        }
    }
    Ok((m, (grid.time(ks[0]), grid.time(*ks.last().expect("nonempty")))))
}

pub fn svd_report_from_matrix(m: &DMatrix<f64>, window: (f64, f64), thresholds: &[f64], mode: ThresholdMode) -> SvdReport {
    let sv = singular_values(m);
    let counts = thresholds.iter().map(|&t| (t, dominant_count(&sv, t, mode))).collect();
    SvdReport { singular_values: sv, counts, mode, window, shape: m.shape() }
}

/// Singular spectrum of one field's snapshot matrix over a time window.
pub fn svd_dimension_report(
    traj: &TrajectoryField,
    field: usize,
    window: (f64, f64),
    thresholds: &[f64],
    mode: ThresholdMode,
) -> Result<SvdReport, SpectralError> {
    let (m, used) = snapshot_matrix(traj, field, window)?;
    Ok(svd_report_from_matrix(&m, used, thresholds, mode))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::solvers::{solve, Equation, EvolutionProblem, InitialCondition, Sinusoid, SpaceTimeGrid};
    use crate::expr::Expr;
    use ndarray::{ArrayD, IxDyn};
    use proptest::prelude::*;

    fn traj_from(grid: SpaceTimeGrid, f: impl Fn(f64, f64) -> f64) -> TrajectoryField {
        let mut a = ArrayD::zeros(IxDyn(&grid.shape()));
        for i in 0..grid.space_points()[0] {
            for k in 0..grid.time_points() {
                a[IxDyn(&[i, k])] = f(grid.coord(0, i), grid.time(k));
            }
        }
        TrajectoryField::new(grid, vec![("u".into(), a)]).unwrap()
    }

    #[test]
    fn rank_one_outer_product() {
        let g = SpaceTimeGrid::periodic_1d(40, [0.0, 1.0], 30, [0.0, 1.0]).unwrap();
        let tr = traj_from(g, |x, t| (1.0 + x * x) * (t + 0.5).exp());
        let r = svd_dimension_report(&tr, 0, (0.0, 1.0), &[1e-12, 0.0], ThresholdMode::Relative).unwrap();
        assert_eq!(r.count(1e-12), 1);
        assert_eq!(r.counts[1], (0.0, 30));
        assert_eq!(r.shape, (40, 30));
        assert!(r.singular_values.windows(2).all(|w| w[0] >= w[1]));
    }

    #[test]
    fn window_selection_and_errors() {
        let g = SpaceTimeGrid::periodic_1d(8, [0.0, 1.0], 10, [0.0, 1.0]).unwrap();
        let tr = traj_from(g, |x, t| x + t);
        let r = svd_dimension_report(&tr, 0, (0.25, 0.55), &[], ThresholdMode::Absolute).unwrap();
        assert_eq!(r.shape, (8, 3));
        assert!((r.window.0 - 0.3).abs() < 1e-12 && (r.window.1 - 0.5).abs() < 1e-12);
        assert!(matches!(svd_dimension_report(&tr, 0, (0.31, 0.39), &[], ThresholdMode::Absolute), Err(SpectralError::EmptyWindow(..))));
        assert!(matches!(svd_dimension_report(&tr, 1, (0.0, 1.0), &[], ThresholdMode::Absolute), Err(SpectralError::UnknownField(1))));
    }

    #[test]
    fn csv_columns() {
        let m = DMatrix::from_diagonal(&nalgebra::DVector::from_vec(vec![3.0, 4.0]));
        let r = svd_report_from_matrix(&m, (0.0, 1.0), &[0.5], ThresholdMode::Relative);
        let mut buf = Vec::new();
        r.write_csv(&mut buf).unwrap();
        let s = String::from_utf8(buf).unwrap();
        assert_eq!(s, "index,singular_value,cumulative_energy\n1,4,0.64\n2,3,1\n");
        assert_eq!(r.counts, vec![(0.5, 2)]);
    }

    fn single_mode(equation: Equation) -> usize {
        let grid = SpaceTimeGrid::periodic_1d(128, [-8.0, 8.0], 500, [0.0, 5.0]).unwrap();
        let init = InitialCondition::SinusoidSum {
            terms: vec![Sinusoid { amplitude: 1.0, frequency: 0.125, shift: 0.0, cosine: false }],
            offset: 0.0,
        };
        let tr = solve(&EvolutionProblem::new(equation, init, grid)).unwrap();
        svd_dimension_report(&tr, 0, (0.0, 5.0), &[1e-3], ThresholdMode::Relative).unwrap().count(1e-3)
    }

    #[test]
    fn single_mode_dimensions() {
        assert_eq!(single_mode(Equation::Transport1d { speed: Expr::constant(4.0) }), 2);
        assert_eq!(single_mode(Equation::Heat1d { diffusivity: Expr::constant(4.0) }), 1);
    }

    proptest! {
        #[test]
        fn transpose_has_same_spectrum(vals in proptest::collection::vec(-1.0f64..1.0, 6 * 4)) {
            let m = DMatrix::from_column_slice(6, 4, &vals);
            let a = singular_values(&m);
            let b = singular_values(&m.transpose());
            prop_assert_eq!(a.len(), b.len());
            for (x, y) in a.iter().zip(&b) {
                prop_assert!((x - y).abs() <= 1e-13 * a[0].max(1.0));
            }
        }

        #[test]
        fn counts_decrease_with_threshold(vals in proptest::collection::vec(-1.0f64..1.0, 5 * 5), t in proptest::collection::vec(0.0f64..1.0, 4)) {
            let m = DMatrix::from_column_slice(5, 5, &vals);
            let mut t = t;
            t.sort_by(f64::total_cmp);
            let r = svd_report_from_matrix(&m, (0.0, 1.0), &t, ThresholdMode::Relative);
            prop_assert!(r.counts.windows(2).all(|w| w[0].1 >= w[1].1));
            prop_assert!(r.singular_values.iter().all(|&s| s >= 0.0));
        }
    }
}
