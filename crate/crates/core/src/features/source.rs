use std::collections::HashMap;

use ndarray::{ArrayD, IxDyn};

use super::{fd_derivative, Dictionary, FeatureDescriptor, FeatureError, MultiIndex};
use crate::jet::Jet;
use crate::solvers::{Equation, EvolutionProblem, ExactSolution, Node, SpaceTimeGrid, TrajectoryField};

/// Where derivative values come from: finite differences of sampled data,
/// or a closed-form solution.
pub trait DerivativeSource: Sync {
    fn grid(&self) -> &SpaceTimeGrid;
    fn field_names(&self) -> &[String];
    fn spatial(&self, field: usize, alpha: MultiIndex, node: &Node) -> f64;
    fn temporal(&self, field: usize, node: &Node) -> f64;

    /// Values of several `(field, alpha)` pairs at one node.
    fn spatial_many(&self, bases: &[(usize, MultiIndex)], node: &Node, out: &mut [f64]) {
        for (o, &(f, a)) in out.iter_mut().zip(bases) {
            *o = self.spatial(f, a, node);
        }
    }

    fn field_index(&self, name: &str) -> Result<usize, FeatureError> {
        self.field_names().iter().position(|n| n == name).ok_or_else(|| FeatureError::UnknownField(name.to_string()))
    }
}

/// Finite-difference derivatives of a trajectory, computed on the full grid
/// once per `(field, alpha)` and shared read-only afterwards.
#[derive(Debug, Clone)]
pub struct FdCache {
    grid: SpaceTimeGrid,
    names: Vec<String>,
    spatial: HashMap<(usize, MultiIndex), ArrayD<f64>>,
    temporal: Vec<ArrayD<f64>>,
}

impl FdCache {
    /// Caches everything `dict` needs plus pure derivatives up to `extra_order`
    /// (used by the Sobolev filter) and the time derivative of every field.
    pub fn new(traj: &TrajectoryField, dict: &Dictionary, extra_order: usize) -> Result<Self, FeatureError> {
        let mut wanted: Vec<(usize, MultiIndex)> = Vec::new();
        for &(f, a) in &dict.base_terms() {
            let name = &dict.fields()[f];
            let fi = traj.field_index(name).ok_or_else(|| FeatureError::UnknownField(name.clone()))?;
            wanted.push((fi, a));
        }
        for fi in 0..traj.field_count() {
            for a in super::multi_indices(traj.grid().space_dim(), extra_order) {
                wanted.push((fi, a));
            }
        }
        Self::with_terms(traj, &wanted)
    }

    pub fn with_terms(traj: &TrajectoryField, wanted: &[(usize, MultiIndex)]) -> Result<Self, FeatureError> {
        let grid = traj.grid().clone();
        let mut spatial = HashMap::new();
        for &(f, a) in wanted {
            if spatial.contains_key(&(f, a)) {
                continue;
            }
            let mut arr = traj.field(f).clone();
            for (axis, &ord) in a.iter().enumerate() {
                if ord > 0 {
                    if axis >= grid.space_dim() {
                        return Err(FeatureError::AxisOutOfRange(axis));
                    }
                    arr = fd_derivative(&arr, &grid, axis, ord as usize)?;
                }
            }
            spatial.insert((f, a), arr);
        }
        let d = grid.space_dim();
        let temporal =
            (0..traj.field_count()).map(|f| fd_derivative(traj.field(f), &grid, d, 1)).collect::<Result<Vec<_>, _>>()?;
        Ok(FdCache { grid, names: traj.names().to_vec(), spatial, temporal })
    }

    pub fn has(&self, field: usize, alpha: MultiIndex) -> bool {
        self.spatial.contains_key(&(field, alpha))
    }
}

impl DerivativeSource for FdCache {
    fn grid(&self) -> &SpaceTimeGrid {
        &self.grid
    }

    fn field_names(&self) -> &[String] {
        &self.names
    }

    fn spatial(&self, field: usize, alpha: MultiIndex, node: &Node) -> f64 {
        let arr = self.spatial.get(&(field, alpha)).unwrap_or_else(|| panic!("derivative {alpha:?} of field {field} was not cached"));
        arr[IxDyn(&self.grid.node_index(node))]
    }

    fn temporal(&self, field: usize, node: &Node) -> f64 {
        self.temporal[field][IxDyn(&self.grid.node_index(node))]
    }
}

/// Derivatives taken from a closed-form solution by Taylor jets; `u_t` is
/// the equation's right-hand side evaluated on those exact derivatives.
#[derive(Debug, Clone)]
pub struct ExactSource {
    grid: SpaceTimeGrid,
    names: Vec<String>,
    solution: ExactSolution,
    rhs: Vec<(crate::expr::Expr, FeatureDescriptor)>,
}

impl ExactSource {
    pub fn new(problem: &EvolutionProblem) -> Result<Self, FeatureError> {
        let solution = ExactSolution::new(problem)?;
        let terms = problem.equation.true_terms();
        let rhs = terms[0]
            .1
            .iter()
            .map(|(c, s)| Ok((c.clone(), s.parse::<FeatureDescriptor>()?)))
            .collect::<Result<Vec<_>, FeatureError>>()?;
        Ok(ExactSource { grid: problem.grid.clone(), names: problem.equation.field_names(), solution, rhs })
    }

    fn point(&self, node: &Node) -> ([f64; 2], f64) {
        let (x, y, t) = self.grid.position(node);
        ([x, y], t)
    }

    // all derivatives of total order <= max at a point, keyed by multi-index
    fn derivatives(&self, p: [f64; 2], t: f64, max: usize) -> HashMap<MultiIndex, f64> {
        let mut out = HashMap::new();
        let along = |dir: [f64; 2]| -> Jet { self.solution.jet_along(p, dir, t).expect("closed form is valid on the grid") };
        if self.grid.space_dim() == 1 {
            let j = along([1.0, 0.0]);
            for n in 0..=max {
                out.insert([n as u8, 0], j.derivative(n));
            }
            return out;
        }
        // directional derivatives along n+1 angles determine all mixed partials of order n
        for n in 0..=max {
            let angles: Vec<f64> = (0..=n).map(|j| std::f64::consts::PI * j as f64 / (n + 1) as f64).collect();
            let dirs: Vec<f64> = angles.iter().map(|&a| along([a.cos(), a.sin()]).derivative(n)).collect();
            let binom = |n: usize, i: usize| (0..i).fold(1.0, |acc, k| acc * (n - k) as f64 / (k + 1) as f64);
            let a = nalgebra::DMatrix::from_fn(n + 1, n + 1, |r, i| {
                let (s, c) = angles[r].sin_cos();
                binom(n, i) * c.powi((n - i) as i32) * s.powi(i as i32)
            });
            let b = nalgebra::DVector::from_vec(dirs);
            let sol = a.lu().solve(&b).expect("distinct angles give an invertible system");
            for i in 0..=n {
                out.insert([(n - i) as u8, i as u8], sol[i]);
            }
        }
        out
    }
}

impl DerivativeSource for ExactSource {
    fn grid(&self) -> &SpaceTimeGrid {
        &self.grid
    }

    fn field_names(&self) -> &[String] {
        &self.names
    }

    fn spatial(&self, _field: usize, alpha: MultiIndex, node: &Node) -> f64 {
        let (p, t) = self.point(node);
        self.derivatives(p, t, (alpha[0] + alpha[1]) as usize)[&alpha]
    }

    fn spatial_many(&self, bases: &[(usize, MultiIndex)], node: &Node, out: &mut [f64]) {
        let (p, t) = self.point(node);
        let max = bases.iter().map(|(_, a)| (a[0] + a[1]) as usize).max().unwrap_or(0);
        let d = self.derivatives(p, t, max);
        for (o, (_, a)) in out.iter_mut().zip(bases) {
            *o = d[a];
        }
    }

    fn temporal(&self, _field: usize, node: &Node) -> f64 {
        let (p, t) = self.point(node);
        let max = self.rhs.iter().map(|(_, d)| d.max_order()).max().unwrap_or(0);
        let d = self.derivatives(p, t, max);
        self.rhs.iter().map(|(c, desc)| c.eval(p[0], p[1], t) * desc.eval(|f| d[&f.alpha])).sum()
    }
}

/// Equations whose `u_t` an [`ExactSource`] can supply.
pub fn exact_source_supported(eq: &Equation) -> bool {
    !matches!(eq, Equation::Schrodinger1dSystem { .. } | Equation::Kdv1d { .. })
}
