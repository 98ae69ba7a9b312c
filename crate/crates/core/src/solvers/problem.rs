use serde::{Deserialize, Serialize};

use super::{InitialCondition, SolveError, SpaceTimeGrid};
use crate::expr::Expr;

fn half() -> Expr {
    Expr::constant(0.5)
}

fn default_slope_factor() -> f64 {
    20.0
}

/// The benchmark equations. Coefficients are closed forms in `(x, t)`.
///
/// | kind | equation |
/// |---|---|
/// | `transport1d` | `u_t = c u_x` |
/// | `heat1d` | `u_t = D u_xx` |
/// | `kdv1d` | `u_t = a u u_x + b u_xxx` |
/// | `schrodinger1d_system` | `u_t = a v_xx - V v`, `v_t = -a u_xx + V u` |
/// | `burgers1d` | `u_t = a u u_x` |
/// | `circular_flow_2d` | `u_t = -y u_x + x u_y` |
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Equation {
    Transport1d {
        speed: Expr,
    },
    Heat1d {
        diffusivity: Expr,
    },
    Kdv1d {
        advection: Expr,
        dispersion: Expr,
    },
    Schrodinger1dSystem {
        #[serde(default = "half")]
        diffusion: Expr,
        potential: Expr,
    },
    Burgers1d {
        advection: Expr,
        /// The run stops once `max |u_x|` exceeds this multiple of its initial value.
        #[serde(default = "default_slope_factor")]
        max_slope_factor: f64,
    },
    #[serde(rename = "circular_flow_2d")]
    CircularFlow2d,
}

impl Equation {
    pub fn name(&self) -> &'static str {
        match self {
            Equation::Transport1d { .. } => "transport1d",
            Equation::Heat1d { .. } => "heat1d",
            Equation::Kdv1d { .. } => "kdv1d",
            Equation::Schrodinger1dSystem { .. } => "schrodinger1d_system",
            Equation::Burgers1d { .. } => "burgers1d",
            Equation::CircularFlow2d => "circular_flow_2d",
        }
    }

    pub fn space_dim(&self) -> usize {
        if matches!(self, Equation::CircularFlow2d) {
            2
        } else {
            1
        }
    }

    pub fn field_names(&self) -> Vec<String> {
        match self {
            Equation::Schrodinger1dSystem { .. } => vec!["u".into(), "v".into()],
            _ => vec!["u".into()],
        }
    }

    /// The right-hand side as `(target field, [(coefficient, descriptor)])`,
    /// with descriptors in the dictionary's string form.
    pub fn true_terms(&self) -> Vec<(String, Vec<(Expr, String)>)> {
        let neg = |e: &Expr| Expr::parse(&format!("-({})", e.source())).expect("negation of a parsed expression");
        match self {
            Equation::Transport1d { speed } => vec![("u".into(), vec![(speed.clone(), "u_x".into())])],
            Equation::Heat1d { diffusivity } => vec![("u".into(), vec![(diffusivity.clone(), "u_xx".into())])],
            Equation::Kdv1d { advection, dispersion } => vec![(
                "u".into(),
                vec![(advection.clone(), "u*u_x".into()), (dispersion.clone(), "u_xxx".into())],
            )],
            Equation::Schrodinger1dSystem { diffusion, potential } => vec![
                ("u".into(), vec![(neg(potential), "v".into()), (diffusion.clone(), "v_xx".into())]),
                ("v".into(), vec![(potential.clone(), "u".into()), (neg(diffusion), "u_xx".into())]),
            ],
            Equation::Burgers1d { advection, .. } => vec![("u".into(), vec![(advection.clone(), "u*u_x".into())])],
            Equation::CircularFlow2d => vec![(
                "u".into(),
                vec![(Expr::parse("-y").unwrap(), "u_x".into()), (Expr::parse("x").unwrap(), "u_y".into())],
            )],
        }
    }
}

/// Internal resolution and step control of the spectral solver.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolverOptions {
    /// Solve on a grid refined by these factors in space and time, then
    /// down-sample to the requested grid.
    #[serde(default = "unit_pair")]
    pub oversample: [usize; 2],
    /// Internal steps per stored time step; chosen from the stability
    /// estimate when absent.
    #[serde(default)]
    pub substeps: Option<usize>,
    /// Refuse to run when the stability estimate asks for more substeps.
    #[serde(default = "default_max_substeps")]
    pub max_substeps: usize,
}

fn unit_pair() -> [usize; 2] {
    [1, 1]
}

fn default_max_substeps() -> usize {
    1000
}

impl Default for SolverOptions {
    fn default() -> Self {
        SolverOptions { oversample: [1, 1], substeps: None, max_substeps: default_max_substeps() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvolutionProblem {
    pub equation: Equation,
    pub initial: InitialCondition,
    /// Initial data of the second field for systems.
    #[serde(default)]
    pub initial_v: Option<InitialCondition>,
    pub grid: SpaceTimeGrid,
    #[serde(default)]
    pub solver: SolverOptions,
}

impl EvolutionProblem {
    pub fn new(equation: Equation, initial: InitialCondition, grid: SpaceTimeGrid) -> Self {
        EvolutionProblem { equation, initial, initial_v: None, grid, solver: SolverOptions::default() }
    }

    pub fn with_second_initial(mut self, initial_v: InitialCondition) -> Self {
        self.initial_v = Some(initial_v);
        self
    }

    pub fn with_solver(mut self, solver: SolverOptions) -> Self {
        self.solver = solver;
        self
    }

    pub fn validate(&self) -> Result<(), SolveError> {
        let d = self.equation.space_dim();
        if self.grid.space_dim() != d {
            return Err(SolveError::InvalidProblem(format!(
                "{} needs a {d}D grid, got {}D",
                self.equation.name(),
                self.grid.space_dim()
            )));
        }
        let is_system = matches!(self.equation, Equation::Schrodinger1dSystem { .. });
        if is_system && self.initial_v.is_none() {
            return Err(SolveError::InvalidProblem("schrodinger1d_system needs `initial_v`".into()));
        }
        if !is_system && self.initial_v.is_some() {
            return Err(SolveError::InvalidProblem(format!("{} takes a single initial condition", self.equation.name())));
        }
        if self.solver.oversample.contains(&0) {
            return Err(SolveError::InvalidProblem("oversample factors must be positive".into()));
        }
        if self.solver.substeps == Some(0) {
            return Err(SolveError::InvalidProblem("substeps must be positive".into()));
        }
        if let Equation::Burgers1d { max_slope_factor, .. } = &self.equation {
            if !(*max_slope_factor > 1.0) {
                return Err(SolveError::InvalidProblem("max_slope_factor must exceed 1".into()));
            }
        }
        // every coefficient must be finite at every node
        let g = &self.grid;
        for (_, terms) in self.equation.true_terms() {
            for (c, _) in terms {
                let nt = g.time_points();
                let tstride = (nt / 64).max(1);
                for k in (0..nt).step_by(tstride).chain(std::iter::once(nt - 1)) {
                    for i in 0..g.space_points()[0] {
                        let x = g.coord(0, i);
                        let ny = if d > 1 { g.space_points()[1] } else { 1 };
                        for j in 0..ny {
                            let y = if d > 1 { g.coord(1, j) } else { 0.0 };
                            if !c.eval(x, y, g.time(k)).is_finite() {
                                return Err(SolveError::InvalidProblem(format!(
                                    "coefficient `{c}` is not finite at x={x}, y={y}, t={}",
                                    g.time(k)
                                )));
                            }
                        }
                    }
                }
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn config_roundtrip() {
        let src = r#"
            equation = { kind = "kdv1d", advection = "3 + 200*t*sin(pi*x)", dispersion = "(5 + sin(400*pi*t/3))/100" }
            initial = { kind = "bump" }
            grid = { space_points = [200], time_points = 1000, space_extent = [[-1.0, 1.0]], time_extent = [0.0, 0.015] }
        "#;
        let p: EvolutionProblem = toml::from_str(src).unwrap();
        assert!(matches!(p.equation, Equation::Kdv1d { .. }));
        assert_eq!(p.solver, SolverOptions::default());
        p.validate().unwrap();
        let back: EvolutionProblem = toml::from_str(&toml::to_string(&p).unwrap()).unwrap();
        assert_eq!(back, p);
    }

    #[test]
    fn missing_slot_is_rejected() {
        let src = r#"
            equation = { kind = "transport1d" }
            initial = { kind = "square" }
            grid = { space_points = [10], time_points = 10, space_extent = [[-8.0, 8.0]], time_extent = [0.0, 1.0] }
        "#;
        assert!(toml::from_str::<EvolutionProblem>(src).is_err());
    }

    #[test]
    fn system_needs_two_initial_conditions() {
        let g = SpaceTimeGrid::periodic_1d(16, [-1.0, 1.0], 4, [0.0, 0.05]).unwrap();
        let eq = Equation::Schrodinger1dSystem { diffusion: half(), potential: Expr::constant(-10.0) };
        let p = EvolutionProblem::new(eq, InitialCondition::Square, g);
        assert!(p.validate().is_err());
        assert!(p.with_second_initial(InitialCondition::Hat).validate().is_ok());
    }

    #[test]
    fn singular_coefficient_is_rejected() {
        let g = SpaceTimeGrid::periodic_1d(16, [-1.0, 1.0], 4, [0.0, 1.0]).unwrap();
        let p = EvolutionProblem::new(Equation::Transport1d { speed: Expr::parse("1/x").unwrap() }, InitialCondition::Square, g);
        assert!(matches!(p.validate(), Err(SolveError::InvalidProblem(_))));
    }
}
