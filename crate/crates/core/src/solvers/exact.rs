use super::{Equation, EvolutionProblem, Profile, SolveError};
use crate::expr::Expr;
use crate::jet::{Jet, JET_ORDER};

const GL_NODES: [f64; 5] = [0.0, -0.538_469_310_105_683_1, 0.538_469_310_105_683_1, -0.906_179_845_938_664, 0.906_179_845_938_664];
const GL_WEIGHTS: [f64; 5] = [
    0.568_888_888_888_888_9,
    0.478_628_670_499_366_5,
    0.478_628_670_499_366_5,
    0.236_926_885_056_189_1,
    0.236_926_885_056_189_1,
];

/// Five-point Gauss-Legendre rule for `int_a^b f`.
pub(crate) fn gauss_legendre(f: impl Fn(f64) -> f64, a: f64, b: f64) -> f64 {
    let (m, r) = (0.5 * (a + b), 0.5 * (b - a));
    GL_NODES.iter().zip(GL_WEIGHTS).map(|(&z, w)| w * f(m + r * z)).sum::<f64>() * r
}

/// `int_a^b c(t) dt` for a coefficient that depends on time only, by
/// composite Gauss-Legendre refined until successive estimates agree.
pub fn time_integral(c: &Expr, a: f64, b: f64) -> f64 {
    if let Some(v) = c.as_constant() {
        return v * (b - a);
    }
    let f = |t: f64| c.eval(0.0, 0.0, t);
    let composite = |n: usize| {
        let h = (b - a) / n as f64;
        (0..n).map(|i| gauss_legendre(f, a + i as f64 * h, a + (i + 1) as f64 * h)).sum::<f64>()
    };
    let mut n = 4;
    let mut prev = composite(n);
    while n < 1 << 16 {
        n *= 2;
        let next = composite(n);
        if (next - prev).abs() <= 1e-14 * (1.0 + next.abs()) {
            return next;
        }
        prev = next;
    }
    prev
}

pub fn has_closed_form(problem: &EvolutionProblem) -> bool {
    ExactSolution::new(problem).is_ok()
}

#[derive(Debug, Clone)]
enum Kind {
    Shift { speed: Expr },
    Decay { diffusivity: Expr },
    Burgers { advection: Expr },
    Rotation,
}

/// A closed-form solution prepared for repeated evaluation.
#[derive(Debug, Clone)]
pub struct ExactSolution {
    kind: Kind,
    profile: Profile,
    t0: f64,
}

impl ExactSolution {
    pub fn new(problem: &EvolutionProblem) -> Result<Self, SolveError> {
        let profile = problem.initial.profile(&problem.grid)?;
        let t0 = problem.grid.time_extent()[0];
        let kind = match &problem.equation {
            Equation::Transport1d { speed } if !speed.uses_space() => Kind::Shift { speed: speed.clone() },
            Equation::Heat1d { diffusivity } if !diffusivity.uses_space() => {
                if profile.fourier_series().is_none() {
                    return Err(SolveError::NoClosedForm("heat1d needs trigonometric initial data".into()));
                }
                Kind::Decay { diffusivity: diffusivity.clone() }
            }
            Equation::Burgers1d { advection, .. } if !advection.uses_space() => Kind::Burgers { advection: advection.clone() },
            Equation::CircularFlow2d => Kind::Rotation,
            other => {
                return Err(SolveError::NoClosedForm(format!(
                    "{} with these coefficients has no closed form",
                    other.name()
                )))
            }
        };
        Ok(ExactSolution { kind, profile, t0 })
    }

    /// Solution restricted to the line `point + s*dir`, as a jet in `s` at `s = 0`.
    pub fn jet_along(&self, point: [f64; 2], dir: [f64; 2], t: f64) -> Result<Jet, SolveError> {
        let s = Jet::variable(0.0);
        let x = Jet::constant(point[0]) + Jet::constant(dir[0]) * s;
        let y = Jet::constant(point[1]) + Jet::constant(dir[1]) * s;
        let tau = t - self.t0;
        match &self.kind {
            Kind::Shift { speed } => {
                let shift = time_integral(speed, self.t0, t);
                Ok(self.profile.eval(x + Jet::constant(shift), y))
            }
            Kind::Decay { diffusivity } => {
                let d = time_integral(diffusivity, self.t0, t);
                let (offset, terms) = self.profile.fourier_series().expect("checked at construction");
                let mut acc = Jet::constant(offset);
                for term in terms {
                    let decay = (-term.omega * term.omega * d).exp();
                    let arg = Jet::constant(term.omega) * x;
                    let (sn, cs) = arg.sin_cos();
                    acc = acc + Jet::constant(decay * term.cos) * cs + Jet::constant(decay * term.sin) * sn;
                }
                Ok(acc)
            }
            Kind::Burgers { advection } => {
                let a = time_integral(advection, self.t0, t);
                let xi = self.characteristic_foot(point[0], a)?;
                let g1 = 1.0 - a * self.profile.eval(Jet::variable(xi), Jet::constant(0.0)).derivative(1);
                // chord iteration on jets gains one Taylor order per sweep
                let mut xj = Jet::constant(xi);
                for _ in 0..JET_ORDER + 2 {
                    let r = xj - x - Jet::constant(a) * self.profile.eval(xj, Jet::constant(0.0));
                    xj = xj - r / Jet::constant(g1);
                }
                Ok(self.profile.eval(xj, Jet::constant(0.0)))
            }
            Kind::Rotation => {
                let (sn, cs) = tau.sin_cos();
                let xr = Jet::constant(cs) * x - Jet::constant(sn) * y;
                let yr = Jet::constant(sn) * x + Jet::constant(cs) * y;
                Ok(self.profile.eval(xr, yr))
            }
        }
    }

    pub fn value(&self, point: [f64; 2], t: f64) -> Result<f64, SolveError> {
        Ok(self.jet_along(point, [1.0, 0.0], t)?.value())
    }

    // solves xi = x + a*u0(xi) by Newton; fails past wave breaking
    fn characteristic_foot(&self, x: f64, a: f64) -> Result<f64, SolveError> {
        let mut xi = x;
        for _ in 0..200 {
            let j = self.profile.eval(Jet::variable(xi), Jet::constant(0.0));
            let g = xi - x - a * j.value();
            let dg = 1.0 - a * j.derivative(1);
            if !(dg > 0.0) {
                return Err(SolveError::NoClosedForm(format!("characteristics cross near x = {x}")));
            }
            let step = g / dg;
            xi -= step;
            if step.abs() <= 1e-15 * (1.0 + xi.abs()) {
                return Ok(xi);
            }
        }
        Err(SolveError::NoClosedForm(format!("characteristic through x = {x} did not converge")))
    }
}

/// Closed-form value of the (first) field at `point` (`[x]` or `[x, y]`) and time `t`.
pub fn evaluate_exact(problem: &EvolutionProblem, point: &[f64], t: f64) -> Result<f64, SolveError> {
    let p = match point {
        [x] => [*x, 0.0],
        [x, y] => [*x, *y],
        _ => return Err(SolveError::InvalidProblem("point must have 1 or 2 coordinates".into())),
    };
    ExactSolution::new(problem)?.value(p, t)
}

/// Jets of the exact solution along each coordinate axis at a point.
pub fn exact_jets(problem: &EvolutionProblem, point: [f64; 2], t: f64) -> Result<Vec<Jet>, SolveError> {
    let sol = ExactSolution::new(problem)?;
    let mut out = vec![sol.jet_along(point, [1.0, 0.0], t)?];
    if problem.grid.space_dim() > 1 {
        out.push(sol.jet_along(point, [0.0, 1.0], t)?);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::solvers::{InitialCondition, SpaceTimeGrid};
    use std::f64::consts::PI;

    fn flow() -> EvolutionProblem {
        let g = SpaceTimeGrid::periodic_2d([64, 64], [-1.0, 1.0], [-1.0, 1.0], 10, [0.0, 2.0 * PI]).unwrap();
        let f = Expr::parse("cos(4*sqrt(x^2+y^2))*cos(2*atan2(y,x))").unwrap();
        EvolutionProblem::new(Equation::CircularFlow2d, InitialCondition::Custom { expr: f }, g)
    }

    #[test]
    fn rotation_identity_and_full_turn() {
        let p = flow();
        let f = |x: f64, y: f64| (4.0 * (x * x + y * y).sqrt()).cos() * (2.0 * y.atan2(x)).cos();
        for &(x, y) in &[(0.3, 0.2), (-0.5, 0.7), (0.9, -0.1)] {
            assert!((evaluate_exact(&p, &[x, y], 0.0).unwrap() - f(x, y)).abs() < 1e-15);
            assert!((evaluate_exact(&p, &[x, y], 2.0 * PI).unwrap() - f(x, y)).abs() < 1e-12);
        }
    }

    #[test]
    fn rotation_satisfies_the_pde() {
        let p = flow();
        let sol = ExactSolution::new(&p).unwrap();
        let (x, y, t) = (0.4, -0.3, 0.7);
        let ux = sol.jet_along([x, y], [1.0, 0.0], t).unwrap().derivative(1);
        let uy = sol.jet_along([x, y], [0.0, 1.0], t).unwrap().derivative(1);
        let h = 1e-5;
        let ut = (sol.value([x, y], t + h).unwrap() - sol.value([x, y], t - h).unwrap()) / (2.0 * h);
        assert!((ut - (-y * ux + x * uy)).abs() < 1e-8);
    }

    #[test]
    fn transport_follows_characteristics() {
        let g = SpaceTimeGrid::periodic_1d(500, [-8.0, 8.0], 5000, [0.0, 5.0]).unwrap();
        let bump = InitialCondition::Bump { center: 0.0, half_width: 1.0, amplitude: 1.0 };
        let p = EvolutionProblem::new(Equation::Transport1d { speed: Expr::constant(4.0) }, bump.clone(), g.clone());
        let u0 = bump.profile(&g).unwrap();
        assert_eq!(evaluate_exact(&p, &[0.0], 0.25).unwrap(), u0.value(1.0, 0.0));
    }

    #[test]
    fn heat_decays_each_mode() {
        let g = SpaceTimeGrid::periodic_1d(500, [-8.0, 8.0], 5000, [0.0, 5.0]).unwrap();
        let init = InitialCondition::Custom { expr: Expr::parse("sin(pi*x/8)").unwrap() };
        let p = EvolutionProblem::new(Equation::Heat1d { diffusivity: Expr::constant(4.0) }, init, g);
        assert!(matches!(ExactSolution::new(&p), Err(SolveError::NoClosedForm(_))));
        let init = InitialCondition::SinusoidSum {
            terms: vec![crate::solvers::Sinusoid { amplitude: 1.0, frequency: 0.125, shift: 0.0, cosine: false }],
            offset: 0.0,
        };
        let p = EvolutionProblem { initial: init, ..p };
        let (x, t) = (1.3, 2.0);
        let want = (-4.0 * (PI / 8.0).powi(2) * t).exp() * (PI * x / 8.0).sin();
        assert!((evaluate_exact(&p, &[x], t).unwrap() - want).abs() < 1e-15);
    }

    #[test]
    fn burgers_jet_solves_the_pde() {
        let g = SpaceTimeGrid::periodic_1d(200, [-1.0, 1.0], 100, [0.0, 0.6]).unwrap();
        let p = EvolutionProblem::new(
            Equation::Burgers1d { advection: Expr::constant(1.1), max_slope_factor: 20.0 },
            InitialCondition::Bump { center: 0.0, half_width: 1.0, amplitude: 1.0 },
            g,
        );
        let sol = ExactSolution::new(&p).unwrap();
        for &x in &[-0.6, -0.2, 0.1, 0.45] {
            let t = 0.5;
            let j = sol.jet_along([x, 0.0], [1.0, 0.0], t).unwrap();
            let h = 1e-5;
            let ut = (sol.value([x, 0.0], t + h).unwrap() - sol.value([x, 0.0], t - h).unwrap()) / (2.0 * h);
            assert!((ut - 1.1 * j.value() * j.derivative(1)).abs() < 1e-7, "x={x}");
            let uxx_fd = (sol.value([x + 1e-4, 0.0], t).unwrap() - 2.0 * j.value() + sol.value([x - 1e-4, 0.0], t).unwrap()) / 1e-8;
            assert!((j.derivative(2) - uxx_fd).abs() < 1e-4 * (1.0 + uxx_fd.abs()));
        }
    }

    #[test]
    fn time_integral_of_oscillating_coefficient() {
        let c = Expr::parse("(5 + sin(400*pi*t/3))/100").unwrap();
        let t = 0.0123;
        let w = 400.0 * PI / 3.0;
        let want = (5.0 * t + (1.0 - (w * t).cos()) / w) / 100.0;
        assert!((time_integral(&c, 0.0, t) - want).abs() < 1e-15);
    }

    #[test]
    fn kdv_has_no_closed_form() {
        let g = SpaceTimeGrid::periodic_1d(16, [-1.0, 1.0], 4, [0.0, 0.01]).unwrap();
        let p = EvolutionProblem::new(
            Equation::Kdv1d { advection: Expr::constant(1.0), dispersion: Expr::constant(0.01) },
            InitialCondition::Square,
            g,
        );
        assert!(matches!(evaluate_exact(&p, &[0.0], 0.0), Err(SolveError::NoClosedForm(_))));
    }
}
