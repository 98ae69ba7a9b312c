use serde::{Deserialize, Serialize};

use super::SolveError;

/// A grid node: spatial indices (unused trailing axes are zero) and a time index.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Node {
    pub space: [usize; 2],
    pub time: usize,
}

impl Node {
    pub fn new_1d(i: usize, k: usize) -> Self {
        Node { space: [i, 0], time: k }
    }

    pub fn new_2d(i: usize, j: usize, k: usize) -> Self {
        Node { space: [i, j], time: k }
    }
}

/// Raw, unvalidated grid description as it appears in configs.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GridSpec {
    pub space_points: Vec<usize>,
    pub time_points: usize,
    pub space_extent: Vec<[f64; 2]>,
    pub time_extent: [f64; 2],
    #[serde(default)]
    pub periodic: Option<Vec<bool>>,
}

/// Uniform tensor grid in one or two space dimensions plus time.
///
/// Node `i` on a spatial axis sits at `a + i*dx` with `dx = (b - a)/n`; time
/// node `k` at `t0 + k*dt` with `dt = (t1 - t0)/nt`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "GridSpec", into = "GridSpec")]
pub struct SpaceTimeGrid {
    space_points: Vec<usize>,
    time_points: usize,
    space_extent: Vec<[f64; 2]>,
    time_extent: [f64; 2],
    periodic: Vec<bool>,
}

impl TryFrom<GridSpec> for SpaceTimeGrid {
    type Error = SolveError;
    fn try_from(s: GridSpec) -> Result<Self, SolveError> {
        let periodic = s.periodic.unwrap_or_else(|| vec![true; s.space_points.len()]);
        SpaceTimeGrid::new(s.space_points, s.time_points, s.space_extent, s.time_extent, periodic)
    }
}

impl From<SpaceTimeGrid> for GridSpec {
    fn from(g: SpaceTimeGrid) -> Self {
        GridSpec {
            space_points: g.space_points,
            time_points: g.time_points,
            space_extent: g.space_extent,
            time_extent: g.time_extent,
            periodic: Some(g.periodic),
        }
    }
}

impl SpaceTimeGrid {
    pub fn new(
        space_points: Vec<usize>,
        time_points: usize,
        space_extent: Vec<[f64; 2]>,
        time_extent: [f64; 2],
        periodic: Vec<bool>,
    ) -> Result<Self, SolveError> {
        let d = space_points.len();
        if d == 0 || d > 2 {
            return Err(SolveError::InvalidGrid(format!("space dimension must be 1 or 2, got {d}")));
        }
        if space_extent.len() != d || periodic.len() != d {
            return Err(SolveError::InvalidGrid("extent/periodic lists must match space dimension".into()));
        }
        for (axis, (&n, e)) in space_points.iter().zip(&space_extent).enumerate() {
            if n == 0 || !(e[1] - e[0] > 0.0) || !e[0].is_finite() || !e[1].is_finite() {
                return Err(SolveError::InvalidGrid(format!("axis {axis}: need points > 0 and a positive extent")));
            }
        }
        if time_points == 0 || !(time_extent[1] - time_extent[0] > 0.0) {
            return Err(SolveError::InvalidGrid("time axis needs points > 0 and a positive extent".into()));
        }
        Ok(SpaceTimeGrid { space_points, time_points, space_extent, time_extent, periodic })
    }

    /// Convenience constructor for a periodic 1D grid.
    pub fn periodic_1d(nx: usize, x: [f64; 2], nt: usize, t: [f64; 2]) -> Result<Self, SolveError> {
        SpaceTimeGrid::new(vec![nx], nt, vec![x], t, vec![true])
    }

    pub fn periodic_2d(n: [usize; 2], x: [f64; 2], y: [f64; 2], nt: usize, t: [f64; 2]) -> Result<Self, SolveError> {
        SpaceTimeGrid::new(n.to_vec(), nt, vec![x, y], t, vec![true, true])
    }

    pub fn space_dim(&self) -> usize {
        self.space_points.len()
    }

    pub fn space_points(&self) -> &[usize] {
        &self.space_points
    }

    pub fn time_points(&self) -> usize {
        self.time_points
    }

    pub fn space_extent(&self) -> &[[f64; 2]] {
        &self.space_extent
    }

    pub fn time_extent(&self) -> [f64; 2] {
        self.time_extent
    }

    pub fn is_periodic(&self, axis: usize) -> bool {
        self.periodic[axis]
    }

    pub fn periodic(&self) -> &[bool] {
        &self.periodic
    }

    pub fn dx(&self, axis: usize) -> f64 {
        let e = self.space_extent[axis];
        (e[1] - e[0]) / self.space_points[axis] as f64
    }

    pub fn dt(&self) -> f64 {
        (self.time_extent[1] - self.time_extent[0]) / self.time_points as f64
    }

    pub fn coord(&self, axis: usize, i: usize) -> f64 {
        self.space_extent[axis][0] + i as f64 * self.dx(axis)
    }

    pub fn time(&self, k: usize) -> f64 {
        self.time_extent[0] + k as f64 * self.dt()
    }

    /// Physical `(x, y, t)` of a node (`y = 0` in 1D).
    pub fn position(&self, node: &Node) -> (f64, f64, f64) {
        let x = self.coord(0, node.space[0]);
        let y = if self.space_dim() > 1 { self.coord(1, node.space[1]) } else { 0.0 };
        (x, y, self.time(node.time))
    }

    /// Array shape `(space points..., time points)`.
    pub fn shape(&self) -> Vec<usize> {
        let mut s = self.space_points.clone();
        s.push(self.time_points);
        s
    }

    pub fn space_len(&self) -> usize {
        self.space_points.iter().product()
    }

    /// Spacing along an array axis (space axes first, time last).
    pub fn spacing(&self, axis: usize) -> f64 {
        if axis < self.space_dim() {
            self.dx(axis)
        } else {
            self.dt()
        }
    }

    pub fn node_index(&self, node: &Node) -> Vec<usize> {
        let mut idx: Vec<usize> = node.space[..self.space_dim()].to_vec();
        idx.push(node.time);
        idx
    }

    /// Same grid with a shorter time axis (first `time_points` nodes kept).
    pub fn truncated_in_time(&self, time_points: usize) -> Result<Self, SolveError> {
        let t0 = self.time_extent[0];
        let t1 = t0 + time_points as f64 * self.dt();
        SpaceTimeGrid::new(self.space_points.clone(), time_points, self.space_extent.clone(), [t0, t1], self.periodic.clone())
    }

    /// Wraps a possibly out-of-range index on a periodic axis.
    pub fn wrap(&self, axis: usize, i: isize) -> Option<usize> {
        let n = self.space_points[axis] as isize;
        if self.periodic[axis] {
            Some(i.rem_euclid(n) as usize)
        } else if (0..n).contains(&i) {
            Some(i as usize)
        } else {
            None
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn paper_grid_spacing() {
        let g = SpaceTimeGrid::periodic_1d(500, [-8.0, 8.0], 5000, [0.0, 5.0]).unwrap();
        assert!((g.dx(0) - 16.0 / 500.0).abs() < 1e-15);
        assert!((g.dt() - 5.0 / 5000.0).abs() < 1e-15);
        assert_eq!(g.shape(), vec![500, 5000]);
        assert_eq!(g.wrap(0, -1), Some(499));
        assert_eq!(g.wrap(0, 500), Some(0));
    }

    #[test]
    fn rejects_degenerate_axes() {
        assert!(SpaceTimeGrid::periodic_1d(0, [0.0, 1.0], 10, [0.0, 1.0]).is_err());
        assert!(SpaceTimeGrid::periodic_1d(10, [1.0, 1.0], 10, [0.0, 1.0]).is_err());
        assert!(SpaceTimeGrid::periodic_1d(10, [0.0, 1.0], 10, [0.0, -1.0]).is_err());
        assert!(SpaceTimeGrid::new(vec![4, 4, 4], 3, vec![[0.0, 1.0]; 3], [0.0, 1.0], vec![true; 3]).is_err());
    }

    #[test]
    fn non_periodic_wrap_rejects() {
        let g = SpaceTimeGrid::new(vec![10], 5, vec![[0.0, 1.0]], [0.0, 1.0], vec![false]).unwrap();
        assert_eq!(g.wrap(0, -1), None);
        assert_eq!(g.wrap(0, 9), Some(9));
    }

    #[test]
    fn serde_validates() {
        let bad = r#"{"space_points":[0],"time_points":3,"space_extent":[[0,1]],"time_extent":[0,1]}"#;
        assert!(serde_json::from_str::<SpaceTimeGrid>(bad).is_err());
        let good = r#"{"space_points":[8],"time_points":3,"space_extent":[[0,1]],"time_extent":[0,1]}"#;
        let g: SpaceTimeGrid = serde_json::from_str(good).unwrap();
        assert!(g.is_periodic(0));
    }
}
