//! Sensor patches: sampling, Sobolev and noise-variation trimming, noise
//! variance estimation and the local condition diagnostic.

mod filter;
mod noise;
mod report;

pub use filter::{
    condition_diagnostic, filter_by_sobolev, identifiable, sobolev_seminorm, variation_test, ConditionDiagnostic,
    VARIATION_QUANTILE,
};
pub use noise::{estimate_noise_variance, lipschitz_estimate, noise_patches, NoiseEstimate};
pub use report::{write_patch_report, PatchReportRow};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::features::FeatureError;
use crate::solvers::{Node, SpaceTimeGrid};

#[derive(Debug, thiserror::Error)]
pub enum PatchError {
    #[error("patch does not fit on axis {axis}: center {center}, radius {radius}, {points} points")]
    OutOfRange { axis: usize, center: usize, radius: usize, points: usize },
    #[error("{0}")]
    InvalidSampling(String),
    #[error("patches {0} and {1} intersect")]
    Intersecting(usize, usize),
    #[error("patch {id} has {got} points, expected {expected}")]
    MismatchedCardinality { id: usize, got: usize, expected: usize },
    #[error("need at least {needed} {what}, got {got}")]
    TooFew { what: &'static str, needed: usize, got: usize },
    #[error("only {fit} non-intersecting patches fit the grid, {wanted} requested")]
    NoRoom { fit: usize, wanted: usize },
    #[error("empty patch")]
    Empty,
    #[error("noise level must be non-negative, got {0}")]
    NegativeSigma(f64),
    #[error("missing derivative data for {0}")]
    MissingDerivatives(String),
    #[error("unknown field index {0}")]
    UnknownField(usize),
    #[error(transparent)]
    Feature(#[from] FeatureError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// A space-time box of grid nodes around `center`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Patch {
    pub id: usize,
    pub center: Node,
    /// Half-width in grid points per space axis (the second is ignored in 1D).
    pub radius: [usize; 2],
    pub time_radius: usize,
    nodes: Vec<Node>,
}

impl Patch {
    /// The full box `center +- radius`, wrapped on periodic axes. A box
    /// leaving a bounded axis or the time range is an error, never clipped.
    pub fn new(id: usize, grid: &SpaceTimeGrid, center: Node, radius: [usize; 2], time_radius: usize) -> Result<Self, PatchError> {
        let d = grid.space_dim();
        let nt = grid.time_points();
        if center.time < time_radius || center.time + time_radius >= nt {
            return Err(PatchError::OutOfRange { axis: d, center: center.time, radius: time_radius, points: nt });
        }
        let mut axes: Vec<Vec<usize>> = Vec::with_capacity(d);
        for a in 0..d {
            let (c, r) = (center.space[a] as isize, radius[a] as isize);
            let n = grid.space_points()[a];
            if center.space[a] >= n || (grid.is_periodic(a) && 2 * radius[a] + 1 > n) {
                return Err(PatchError::OutOfRange { axis: a, center: center.space[a], radius: radius[a], points: n });
            }
            let idx = (c - r..=c + r).map(|i| grid.wrap(a, i)).collect::<Option<Vec<_>>>();
            axes.push(idx.ok_or(PatchError::OutOfRange { axis: a, center: center.space[a], radius: radius[a], points: n })?);
        }
        let ys = if d > 1 { axes[1].clone() } else { vec![0] };
        let mut nodes = Vec::with_capacity(axes[0].len() * ys.len() * (2 * time_radius + 1));
        for k in center.time - time_radius..=center.time + time_radius {
            for &j in &ys {
                for &i in &axes[0] {
                    nodes.push(Node { space: [i, j], time: k });
                }
            }
        }
        let radius = if d > 1 { radius } else { [radius[0], 0] };
        Ok(Patch { id, center, radius, time_radius, nodes })
    }

    pub fn nodes(&self) -> &[Node] {
        &self.nodes
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Whether the two boxes share a grid node.
    pub fn intersects(&self, other: &Patch) -> bool {
        if self.center.time.abs_diff(other.center.time) > self.time_radius + other.time_radius {
            return false;
        }
        let mine: std::collections::HashSet<&Node> = self.nodes.iter().collect();
        other.nodes.iter().any(|n| mine.contains(n))
    }
}

/// How observation times are spread over the admissible window
/// `[time_radius, nt - 1 - time_radius]`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TimeSpacing {
    /// Both ends of the window included.
    #[default]
    Inclusive,
    /// Interior points `(i + 1) / (count + 1)` of the window.
    Interior,
}

/// `count` evenly spread time indices at which every patch of the given
/// time radius fits.
pub fn observation_times(grid: &SpaceTimeGrid, count: usize, time_radius: usize, spacing: TimeSpacing) -> Result<Vec<usize>, PatchError> {
    let nt = grid.time_points();
    if count == 0 {
        return Err(PatchError::InvalidSampling("at least one observation time is needed".into()));
    }
    if 2 * time_radius + 1 > nt {
        return Err(PatchError::OutOfRange { axis: grid.space_dim(), center: 0, radius: time_radius, points: nt });
    }
    let (lo, hi) = (time_radius as f64, (nt - 1 - time_radius) as f64);
    Ok((0..count)
        .map(|i| {
            let s = match spacing {
                TimeSpacing::Inclusive if count == 1 => 0.5,
                TimeSpacing::Inclusive => i as f64 / (count - 1) as f64,
                TimeSpacing::Interior => (i + 1) as f64 / (count + 1) as f64,
            };
            (lo + s * (hi - lo)).round() as usize
        })
        .collect())
}

// admissible center range on a space axis
fn center_range(grid: &SpaceTimeGrid, axis: usize, r: usize) -> Result<(usize, usize), PatchError> {
    let n = grid.space_points()[axis];
    if 2 * r + 1 > n {
        return Err(PatchError::OutOfRange { axis, center: 0, radius: r, points: n });
    }
    Ok(if grid.is_periodic(axis) { (0, n - 1) } else { (r, n - 1 - r) })
}

/// `n_sensors` distinct random spatial centers, each observed at every
/// time in `times`. Patch ids run sensor-major.
pub fn sample_sensors(
    grid: &SpaceTimeGrid,
    n_sensors: usize,
    radius: [usize; 2],
    time_radius: usize,
    times: &[usize],
    seed: u64,
) -> Result<Vec<Patch>, PatchError> {
    let d = grid.space_dim();
    let ranges = (0..d).map(|a| center_range(grid, a, radius[a])).collect::<Result<Vec<_>, _>>()?;
    let available: usize = ranges.iter().map(|(lo, hi)| hi - lo + 1).product();
    if n_sensors > available {
        return Err(PatchError::InvalidSampling(format!("{n_sensors} sensors requested but only {available} positions fit")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut centers: Vec<[usize; 2]> = Vec::with_capacity(n_sensors);
    while centers.len() < n_sensors {
        let mut c = [0usize; 2];
        for (a, &(lo, hi)) in ranges.iter().enumerate() {
            c[a] = rng.random_range(lo..=hi);
        }
        if !centers.contains(&c) {
            centers.push(c);
        }
    }
    place(grid, &centers, radius, time_radius, times)
}

/// Sensors at random angles on a circle of `circle_radius` grid points
/// around the node nearest the origin (2D only).
pub fn sample_sensors_on_circle(
    grid: &SpaceTimeGrid,
    n_sensors: usize,
    circle_radius: f64,
    radius: [usize; 2],
    time_radius: usize,
    times: &[usize],
    seed: u64,
) -> Result<Vec<Patch>, PatchError> {
    if grid.space_dim() != 2 {
        return Err(PatchError::InvalidSampling("circle placement needs a 2D grid".into()));
    }
    let origin: Vec<f64> = (0..2).map(|a| -grid.space_extent()[a][0] / grid.dx(a)).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut centers = Vec::with_capacity(n_sensors);
    for _ in 0..n_sensors {
        let theta = rng.random_range(0.0..std::f64::consts::TAU);
        let mut c = [0usize; 2];
        for a in 0..2 {
            let off = if a == 0 { theta.cos() } else { theta.sin() };
            let i = (origin[a] + circle_radius * off).round() as isize;
            c[a] = grid.wrap(a, i).ok_or(PatchError::InvalidSampling(format!("circle of radius {circle_radius} leaves the grid")))?;
        }
        centers.push(c);
    }
    place(grid, &centers, radius, time_radius, times)
}

fn place(grid: &SpaceTimeGrid, centers: &[[usize; 2]], radius: [usize; 2], time_radius: usize, times: &[usize]) -> Result<Vec<Patch>, PatchError> {
    let mut out = Vec::with_capacity(centers.len() * times.len());
    for c in centers {
        for &k in times {
            let id = out.len();
            out.push(Patch::new(id, grid, Node { space: *c, time: k }, radius, time_radius)?);
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grid() -> SpaceTimeGrid {
        SpaceTimeGrid::periodic_1d(100, [-8.0, 8.0], 500, [0.0, 5.0]).unwrap()
    }

    #[test]
    fn sensor_counts_and_sizes() {
        let g = grid();
        let times = observation_times(&g, 10, 5, TimeSpacing::Inclusive).unwrap();
        let p = sample_sensors(&g, 5, [3, 0], 5, &times, 1).unwrap();
        assert_eq!(p.len(), 50);
        assert!(p.iter().all(|p| p.len() == 77));
        let again = sample_sensors(&g, 5, [3, 0], 5, &times, 1).unwrap();
        assert_eq!(p, again);
        let other = sample_sensors(&g, 5, [3, 0], 5, &times, 2).unwrap();
        assert_ne!(p, other);
    }

    #[test]
    fn wrapping_and_rejection() {
        let g = grid();
        let p = Patch::new(0, &g, Node::new_1d(1, 10), [3, 0], 2).unwrap();
        assert_eq!(p.nodes()[0].space[0], 98);
        assert!(Patch::new(0, &g, Node::new_1d(1, 1), [3, 0], 2).is_err());
        let b = SpaceTimeGrid::new(vec![20], 10, vec![[0.0, 1.0]], [0.0, 1.0], vec![false]).unwrap();
        assert!(matches!(Patch::new(0, &b, Node::new_1d(2, 5), [3, 0], 1), Err(PatchError::OutOfRange { axis: 0, .. })));
        assert!(Patch::new(0, &b, Node::new_1d(3, 5), [3, 0], 1).is_ok());
        assert!(sample_sensors(&b, 3, [10, 0], 1, &[5], 0).is_err());
    }

    #[test]
    fn time_spacings() {
        let g = grid();
        assert_eq!(observation_times(&g, 3, 5, TimeSpacing::Inclusive).unwrap(), vec![5, 250, 494]);
        let inner = observation_times(&g, 3, 5, TimeSpacing::Interior).unwrap();
        assert!(inner[0] > 5 && inner[2] < 494);
    }

    #[test]
    fn circle_placement_distance() {
        let g = SpaceTimeGrid::periodic_2d([64, 64], [-1.0, 1.0], [-1.0, 1.0], 20, [0.0, 1.0]).unwrap();
        let p = sample_sensors_on_circle(&g, 5, 10.0, [3, 3], 2, &[10], 4).unwrap();
        for q in &p {
            let (x, y, _) = g.position(&q.center);
            let r = (x * x + y * y).sqrt() / g.dx(0);
            assert!((r - 10.0).abs() < 1.0, "radius {r}");
            assert_eq!(q.len(), 49 * 5);
        }
    }
}
