use nalgebra::{DMatrix, DVector};

use super::{multi_indices, DerivativeSource, Dictionary, FeatureDescriptor, FeatureError, MultiIndex};
use crate::patches::Patch;
use crate::solvers::Node;

// a dictionary entry rewritten in terms of positions in the base-value vector
enum Compiled {
    Product(Vec<usize>),
    Sin(usize),
    Cos(usize),
}

struct Plan {
    bases: Vec<(usize, MultiIndex)>,
    entries: Vec<Compiled>,
}

impl Plan {
    fn new<S: DerivativeSource + ?Sized>(source: &S, dict: &Dictionary) -> Result<Self, FeatureError> {
        let map = dict.fields().iter().map(|n| source.field_index(n)).collect::<Result<Vec<_>, _>>()?;
        let bases: Vec<(usize, MultiIndex)> = dict.base_terms().into_iter().map(|(f, a)| (map[f], a)).collect();
        let pos = |f: &super::Factor| {
            let fi = map[dict.fields().iter().position(|n| n == &f.field).expect("validated by the dictionary")];
            bases.iter().position(|b| *b == (fi, f.alpha)).expect("every factor is a base term")
        };
        let entries = dict
            .entries()
            .iter()
            .map(|e| match e {
                FeatureDescriptor::Product(fs) => Compiled::Product(fs.iter().map(pos).collect()),
                FeatureDescriptor::Sin(f) => Compiled::Sin(pos(f)),
                FeatureDescriptor::Cos(f) => Compiled::Cos(pos(f)),
            })
            .collect();
        Ok(Plan { bases, entries })
    }

    fn eval(&self, k: usize, vals: &[f64]) -> f64 {
        match &self.entries[k] {
            Compiled::Product(p) => p.iter().map(|&i| vals[i]).product(),
            Compiled::Sin(i) => vals[*i].sin(),
            Compiled::Cos(i) => vals[*i].cos(),
        }
    }
}

/// Feature matrix with one row per node and one column per dictionary entry.
/// Base derivatives are gathered once per node and the products formed from them.
pub fn evaluate_features<S: DerivativeSource + ?Sized>(
    source: &S,
    dict: &Dictionary,
    nodes: &[Node],
) -> Result<DMatrix<f64>, FeatureError> {
    let plan = Plan::new(source, dict)?;
    let mut f = DMatrix::zeros(nodes.len(), dict.len());
    let mut vals = vec![0.0; plan.bases.len()];
    for (m, node) in nodes.iter().enumerate() {
        source.spatial_many(&plan.bases, node, &mut vals);
        for k in 0..dict.len() {
            f[(m, k)] = plan.eval(k, &vals);
        }
    }
    for k in 0..dict.len() {
        if f.column(k).iter().any(|v| !v.is_finite()) {
            return Err(FeatureError::NonFinite(format!("feature `{}`", dict.entry(k))));
        }
    }
    Ok(f)
}

/// One patch's local least-squares system `F c ~ u_t`, with the raw field
/// values and pure spatial derivatives the patch filters need.
#[derive(Debug, Clone)]
pub struct PatchRegressionSystem {
    pub patch_id: usize,
    pub center: Node,
    /// `(x, y, t)` of the patch center.
    pub center_position: (f64, f64, f64),
    pub nodes: Vec<Node>,
    pub coords: Vec<(f64, f64, f64)>,
    /// `m x K` feature matrix.
    pub features: DMatrix<f64>,
    pub target: DVector<f64>,
    pub target_field: usize,
    /// `(field, alpha, values)` for every field and `1 <= |alpha| <= derivative order`.
    pub derivatives: Vec<(usize, MultiIndex, Vec<f64>)>,
    /// Field values at the nodes, one vector per field.
    pub values: Vec<Vec<f64>>,
    /// Space-time volume of one grid cell, the quadrature weight of a row.
    pub cell_volume: f64,
    pub space_dim: usize,
}

impl PatchRegressionSystem {
    /// A bare system with no grid metadata, for synthetic problems.
    pub fn from_parts(patch_id: usize, features: DMatrix<f64>, target: DVector<f64>) -> Self {
        let m = features.nrows();
        let center = Node::new_1d(0, 0);
        PatchRegressionSystem {
            patch_id,
            center,
            center_position: (0.0, 0.0, 0.0),
            nodes: vec![center; m],
            coords: vec![(0.0, 0.0, 0.0); m],
            features,
            target,
            target_field: 0,
            derivatives: Vec::new(),
            values: Vec::new(),
            cell_volume: 1.0,
            space_dim: 1,
        }
    }

    pub fn rows(&self) -> usize {
        self.nodes.len()
    }

    pub fn cols(&self) -> usize {
        self.features.ncols()
    }
}

/// Assembles the system of `patch` for the time derivative of field
/// `target`. Pure spatial derivatives up to `derivative_order` are attached
/// for the Sobolev filter.
pub fn assemble_patch_system<S: DerivativeSource + ?Sized>(
    source: &S,
    patch: &Patch,
    dict: &Dictionary,
    target: usize,
    derivative_order: usize,
) -> Result<PatchRegressionSystem, FeatureError> {
    let nodes = patch.nodes();
    if nodes.is_empty() {
        return Err(FeatureError::DegeneratePatch(patch.id));
    }
    let grid = source.grid();
    let features = evaluate_features(source, dict, nodes)?;
    let target_vals: Vec<f64> = nodes.iter().map(|n| source.temporal(target, n)).collect();
    if target_vals.iter().any(|v| !v.is_finite()) {
        return Err(FeatureError::NonFinite("time derivative".into()));
    }
    let nf = source.field_names().len();
    let mut bases: Vec<(usize, MultiIndex)> = (0..nf).map(|f| (f, [0, 0])).collect();
    for f in 0..nf {
        for a in multi_indices(grid.space_dim(), derivative_order).into_iter().skip(1) {
            bases.push((f, a));
        }
    }
    let mut cols = vec![Vec::with_capacity(nodes.len()); bases.len()];
    let mut buf = vec![0.0; bases.len()];
    for n in nodes {
        source.spatial_many(&bases, n, &mut buf);
        for (c, v) in cols.iter_mut().zip(&buf) {
            c.push(*v);
        }
    }
    let values: Vec<Vec<f64>> = cols.drain(..nf).collect();
    let derivatives = bases[nf..].iter().zip(cols).map(|(&(f, a), v)| (f, a, v)).collect();
    Ok(PatchRegressionSystem {
        patch_id: patch.id,
        center: patch.center,
        center_position: grid.position(&patch.center),
        coords: nodes.iter().map(|n| grid.position(n)).collect(),
        nodes: nodes.to_vec(),
        features,
        target: DVector::from_vec(target_vals),
        target_field: target,
        derivatives,
        values,
        cell_volume: (0..=grid.space_dim()).map(|a| grid.spacing(a)).product(),
        space_dim: grid.space_dim(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::Expr;
    use crate::features::{build_dictionary, ExactSource, FdCache};
    use crate::solvers::{Equation, EvolutionProblem, InitialCondition, SpaceTimeGrid, TrajectoryField};
    use ndarray::{ArrayD, IxDyn};

    fn traj_from(g: &SpaceTimeGrid, f: impl Fn(f64, f64) -> f64) -> TrajectoryField {
        let a = ArrayD::from_shape_fn(IxDyn(&g.shape()), |ix| f(g.coord(0, ix[0]), g.time(ix[1])));
        TrajectoryField::new(g.clone(), vec![("u".into(), a)]).unwrap()
    }

    #[test]
    fn identity_product_and_trig_features() {
        let g = SpaceTimeGrid::new(vec![20], 5, vec![[0.0, 2.0]], [0.0, 1.0], vec![false]).unwrap();
        let tr = traj_from(&g, |x, _| x);
        let dict = Dictionary::from_strings(&["u", "u*u_x", "u_x"]).unwrap();
        let cache = FdCache::new(&tr, &dict, 0).unwrap();
        let node = Node::new_1d(7, 2);
        let f = evaluate_features(&cache, &dict, &[node]).unwrap();
        let x = g.coord(0, 7);
        assert_eq!(f[(0, 0)], x);
        assert!((f[(0, 1)] - x).abs() < 1e-12);
        // product column is the elementwise product of its factors
        assert!((f[(0, 1)] - f[(0, 0)] * f[(0, 2)]).abs() < 1e-15);

        let half_pi = traj_from(&g, |_, _| std::f64::consts::FRAC_PI_2);
        let d = Dictionary::from_strings(&["sin(u)"]).unwrap();
        let c = FdCache::new(&half_pi, &d, 0).unwrap();
        let f = evaluate_features(&c, &d, &[Node::new_1d(0, 0), Node::new_1d(19, 4)]).unwrap();
        assert!(f.iter().all(|&v| v == 1.0));
    }

    #[test]
    fn patch_shape_and_constant_target() {
        let g = SpaceTimeGrid::periodic_1d(64, [-1.0, 1.0], 40, [0.0, 1.0]).unwrap();
        let tr = traj_from(&g, |_, _| 3.0);
        let dict = build_dictionary(&["u"], 1, 4, 3, &[]).unwrap();
        let cache = FdCache::new(&tr, &dict, 4).unwrap();
        let patch = Patch::new(0, &g, Node::new_1d(0, 20), [3, 0], 5).unwrap();
        let sys = assemble_patch_system(&cache, &patch, &dict, 0, 4).unwrap();
        assert_eq!((sys.features.nrows(), sys.features.ncols()), (77, 55));
        assert!(sys.target.iter().all(|v| v.abs() < 1e-12));
        assert_eq!(sys.derivatives.len(), 4);
    }

    #[test]
    fn exact_heat_residual_is_tiny() {
        let g = SpaceTimeGrid::periodic_1d(200, [-1.0, 1.0], 500, [0.0, 0.5]).unwrap();
        let init = InitialCondition::RandomFourier { modes: 4, seed: 3, offset: 0.0, half_period: None };
        let p = EvolutionProblem::new(Equation::Heat1d { diffusivity: Expr::constant(0.5) }, init, g.clone());
        let dict = build_dictionary(&["u"], 1, 2, 1, &[]).unwrap();
        let patch = Patch::new(0, &g, Node::new_1d(50, 250), [3, 0], 15).unwrap();

        let exact = ExactSource::new(&p).unwrap();
        let sys = assemble_patch_system(&exact, &patch, &dict, 0, 2).unwrap();
        let c = DVector::from_vec(vec![0.0, 0.0, 0.5]);
        let r = (&sys.features * &c - &sys.target).norm();
        assert!(r < 1e-12 * sys.target.norm().max(1.0), "exact residual {r}");

        // sampled data: residual at the level of the stencils' truncation error
        let tr = crate::solvers::solve(&p).unwrap();
        let cache = FdCache::new(&tr, &dict, 2).unwrap();
        let sys = assemble_patch_system(&cache, &patch, &dict, 0, 2).unwrap();
        let r = (&sys.features * &c - &sys.target).norm() / sys.target.norm();
        assert!(r < 1e-3, "fd relative residual {r}");
    }

    proptest::proptest! {
        #[test]
        fn product_column_is_elementwise_product(vals in proptest::collection::vec(-2.0f64..2.0, 20 * 6)) {
            let g = SpaceTimeGrid::periodic_1d(20, [0.0, 1.0], 6, [0.0, 1.0]).unwrap();
            let a = ArrayD::from_shape_vec(IxDyn(&[20, 6]), vals).unwrap();
            let tr = TrajectoryField::new(g.clone(), vec![("u".into(), a)]).unwrap();
            let dict = Dictionary::from_strings(&["u", "u_x", "u_xx", "u*u_x*u_xx", "u_x*u_x"]).unwrap();
            let cache = FdCache::new(&tr, &dict, 0).unwrap();
            let nodes: Vec<Node> = (0..20).map(|i| Node::new_1d(i, i % 6)).collect();
            let f = evaluate_features(&cache, &dict, &nodes).unwrap();
            for m in 0..20 {
                let want = f[(m, 0)] * f[(m, 1)] * f[(m, 2)];
                proptest::prop_assert!((f[(m, 3)] - want).abs() <= 1e-12 * want.abs().max(1.0));
                proptest::prop_assert!((f[(m, 4)] - f[(m, 1)] * f[(m, 1)]).abs() <= 1e-12 * f[(m, 4)].abs().max(1.0));
            }
        }
    }
}
