use ndarray::{ArrayD, ArrayView1, ArrayViewMut1, Axis};

use super::FeatureError;
use crate::solvers::SpaceTimeGrid;

/// Accuracy order used on spatial axes.
pub const SPACE_ACCURACY: usize = 4;
/// Accuracy order used on the time axis.
pub const TIME_ACCURACY: usize = 2;

/// Fornberg's recursion: `w[k][j]` is the weight of node `x[j]` in the
/// `k`-th derivative at `z`, for `k = 0..=m`.
pub fn fornberg_weights(z: f64, x: &[f64], m: usize) -> Vec<Vec<f64>> {
    let n = x.len();
    let mut c = vec![vec![0.0; n]; m + 1];
    let mut c1 = 1.0;
    let mut c4 = x[0] - z;
    c[0][0] = 1.0;
    for i in 1..n {
        let mn = i.min(m);
        let mut c2 = 1.0;
        let c5 = c4;
        c4 = x[i] - z;
        for j in 0..i {
            let c3 = x[i] - x[j];
            c2 *= c3;
            if j == i - 1 {
                for k in (1..=mn).rev() {
                    c[k][i] = c1 * (k as f64 * c[k - 1][i - 1] - c5 * c[k][i - 1]) / c2;
                }
                c[0][i] = -c1 * c5 * c[0][i - 1] / c2;
            }
            for k in (1..=mn).rev() {
                c[k][j] = (c4 * c[k][j] - k as f64 * c[k - 1][j]) / c3;
            }
            c[0][j] = c4 * c[0][j] / c3;
        }
        c1 = c2;
    }
    c
}

/// A derivative stencil along one axis of length `n`.
#[derive(Debug, Clone)]
pub struct Stencil {
    n: usize,
    q: usize,
    periodic: bool,
    interior: Vec<f64>,
    // (window start, weights) for the first and last q nodes of a bounded axis
    left: Vec<(usize, Vec<f64>)>,
    right: Vec<(usize, Vec<f64>)>,
}

impl Stencil {
    /// `order`-th derivative with the given accuracy on spacing `h`.
    pub fn new(n: usize, order: usize, accuracy: usize, periodic: bool, h: f64) -> Result<Self, FeatureError> {
        if order == 0 {
            return Err(FeatureError::InvalidDerivative("derivative order must be at least 1".into()));
        }
        let accuracy = accuracy + accuracy % 2;
        let q = (order + 1) / 2 - 1 + accuracy / 2;
        let width = if periodic { 2 * q + 1 } else { (2 * q + 1).max(order + accuracy) };
        if n < width {
            return Err(FeatureError::StencilTooWide { points: n, needed: width });
        }
        let scale = h.powi(-(order as i32));
        let weights = |z: f64, nodes: &[f64]| -> Vec<f64> {
            fornberg_weights(z, nodes, order)[order].iter().map(|w| w * scale).collect()
        };
        let offsets: Vec<f64> = (-(q as isize)..=q as isize).map(|o| o as f64).collect();
        let interior = weights(0.0, &offsets);
        let mut left = Vec::new();
        let mut right = Vec::new();
        if !periodic {
            let nodes: Vec<f64> = (0..width).map(|i| i as f64).collect();
            for i in 0..q {
                left.push((0, weights(i as f64, &nodes)));
                let start = n - width;
                right.push((start, weights((n - q + i - start) as f64, &nodes)));
            }
        }
        Ok(Stencil { n, q, periodic, interior, left, right })
    }

    pub fn half_width(&self) -> usize {
        self.q
    }

    /// Derivative at node `i` of the sequence `f`.
    pub fn at(&self, f: impl Fn(usize) -> f64, i: usize) -> f64 {
        let (n, q) = (self.n, self.q);
        if self.periodic || (i >= q && i + q < n) {
            let mut acc = 0.0;
            for (j, w) in self.interior.iter().enumerate() {
                let idx = (i + n + j - q) % n;
                acc += w * f(idx);
            }
            acc
        } else {
            let (start, w) = if i < q { &self.left[i] } else { &self.right[i + q - n] };
            w.iter().enumerate().map(|(j, w)| w * f(start + j)).sum()
        }
    }

    fn apply(&self, input: ArrayView1<f64>, mut out: ArrayViewMut1<f64>) {
        for i in 0..self.n {
            out[i] = self.at(|j| input[j], i);
        }
    }
}

/// Stencil for an array axis of `grid` (space axes first, time last).
pub fn axis_stencil(grid: &SpaceTimeGrid, axis: usize, order: usize) -> Result<Stencil, FeatureError> {
    let d = grid.space_dim();
    if axis > d {
        return Err(FeatureError::AxisOutOfRange(axis));
    }
    let (n, accuracy, periodic) =
        if axis < d { (grid.space_points()[axis], SPACE_ACCURACY, grid.is_periodic(axis)) } else { (grid.time_points(), TIME_ACCURACY, false) };
    Stencil::new(n, order, accuracy, periodic, grid.spacing(axis))
}

/// Finite-difference derivative of a grid array along `axis`: 4th-order
/// central in space, 2nd-order central in time, wrapping on periodic axes
/// and switching to one-sided windows at bounded ends.
pub fn fd_derivative(field: &ArrayD<f64>, grid: &SpaceTimeGrid, axis: usize, order: usize) -> Result<ArrayD<f64>, FeatureError> {
    if field.shape() != grid.shape().as_slice() {
        return Err(FeatureError::ShapeMismatch);
    }
    let st = axis_stencil(grid, axis, order)?;
    let mut out = ArrayD::zeros(field.raw_dim());
    for (lane, lane_out) in field.lanes(Axis(axis)).into_iter().zip(out.lanes_mut(Axis(axis))) {
        st.apply(lane, lane_out);
    }
    Ok(out)
}
