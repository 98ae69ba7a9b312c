//! Fourier pseudo-spectral solver for the periodic 1D benchmarks.
//!
//! The state is the complex field `psi` (real equations keep a vanishing
//! imaginary part; the Schrodinger system is `psi = u + i v`). Terms whose
//! coefficient is uniform in space are folded into an integrating factor
//! `exp(symbol(k) * int c(s) ds)`; the rest are advanced explicitly by the
//! Lawson (integrating-factor) form of classical RK4.

use std::f64::consts::PI;
use std::sync::Arc;

use ndarray::{ArrayD, IxDyn};
use rustfft::num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use super::exact::ExactSolution;
use super::{gauss_legendre, Equation, EvolutionProblem, SolveError, SpaceTimeGrid, TrajectoryField};
use crate::expr::Expr;

const RK4_STABILITY_RADIUS: f64 = 2.5;

/// Solves the problem on its grid. `circular_flow_2d` is sampled from its
/// closed form; every other kind runs the spectral scheme.
pub fn solve(problem: &EvolutionProblem) -> Result<TrajectoryField, SolveError> {
    problem.validate()?;
    let provenance = serde_json::json!({ "problem": problem, "library_version": env!("CARGO_PKG_VERSION") });
    if let Equation::CircularFlow2d = problem.equation {
        let sol = ExactSolution::new(problem)?;
        let g = &problem.grid;
        let shape = g.shape();
        let mut err = None;
        let arr = ArrayD::from_shape_fn(IxDyn(&shape), |ix| {
            sol.value([g.coord(0, ix[0]), g.coord(1, ix[1])], g.time(ix[2])).unwrap_or_else(|e| {
                err.get_or_insert(e);
                f64::NAN
            })
        });
        if let Some(e) = err {
            return Err(e);
        }
        return TrajectoryField::new(g.clone(), vec![("u".into(), arr)]).map(|t| t.with_provenance(provenance));
    }
    if !problem.grid.is_periodic(0) {
        return Err(SolveError::NonPeriodicAxis(0));
    }
    let run = SpectralRun::new(problem)?;
    let (grid, fields, extra) = run.integrate()?;
    let mut prov = provenance;
    prov["solver"] = extra;
    TrajectoryField::new(grid, fields).map(|t| t.with_provenance(prov))
}

// spatially varying coefficient, cached by what it depends on
enum Coef {
    Const(f64),
    Space(Vec<f64>),
    Full(Expr),
}

impl Coef {
    fn new(e: &Expr, x: &[f64]) -> Coef {
        if let Some(v) = e.as_constant() {
            Coef::Const(v)
        } else if !e.uses_time() {
            Coef::Space(x.iter().map(|&xi| e.eval(xi, 0.0, 0.0)).collect())
        } else {
            Coef::Full(e.clone())
        }
    }

    fn fill(&self, x: &[f64], t: f64, out: &mut [f64]) {
        match self {
            Coef::Const(v) => out.iter_mut().for_each(|o| *o = *v),
            Coef::Space(v) => out.copy_from_slice(v),
            Coef::Full(e) => out.iter_mut().zip(x).for_each(|(o, &xi)| *o = e.eval(xi, 0.0, t)),
        }
    }
}

enum Explicit {
    // coef * factor * d^p psi
    Linear { p: u32 },
    // coef * factor * psi * psi_x
    Advect,
}

struct ExplicitTerm {
    coef: Coef,
    expr: Expr,
    factor: Complex64,
    kind: Explicit,
}

struct ImplicitTerm {
    coef: Expr,
    symbol: Vec<Complex64>,
}

struct SpectralRun<'a> {
    problem: &'a EvolutionProblem,
    n: usize,
    x: Vec<f64>,
    k: Vec<f64>,
    kmax: f64,
    implicit: Vec<ImplicitTerm>,
    explicit: Vec<ExplicitTerm>,
    filter: Option<Vec<f64>>,
    psi0: Vec<Complex64>,
    fine: SpaceTimeGrid,
    fwd: Arc<dyn Fft<f64>>,
    inv: Arc<dyn Fft<f64>>,
}

/// `(ik)^p`, with the Nyquist mode dropped for odd `p`.
fn derivative_symbol(k: &[f64], p: u32) -> Vec<Complex64> {
    let n = k.len();
    k.iter()
        .enumerate()
        .map(|(j, &kj)| {
            if p % 2 == 1 && n % 2 == 0 && j == n / 2 {
                Complex64::new(0.0, 0.0)
            } else {
                Complex64::new(0.0, kj).powu(p)
            }
        })
        .collect()
}

pub(crate) fn wavenumbers(n: usize, length: f64) -> Vec<f64> {
    (0..n)
        .map(|j| {
            let m = if j <= n / 2 { j as f64 } else { j as f64 - n as f64 };
            2.0 * PI * m / length
        })
        .collect()
}

impl<'a> SpectralRun<'a> {
    fn new(problem: &'a EvolutionProblem) -> Result<Self, SolveError> {
        let g = &problem.grid;
        let [sx, st] = problem.solver.oversample;
        let fine = SpaceTimeGrid::new(
            vec![g.space_points()[0] * sx],
            g.time_points() * st,
            g.space_extent().to_vec(),
            g.time_extent(),
            g.periodic().to_vec(),
        )?;
        let n = fine.space_points()[0];
        let length = fine.space_extent()[0][1] - fine.space_extent()[0][0];
        let x: Vec<f64> = (0..n).map(|i| fine.coord(0, i)).collect();
        let k = wavenumbers(n, length);
        let kmax = PI * n as f64 / length;
        let mut planner = FftPlanner::new();
        let fwd = planner.plan_fft_forward(n);
        let inv = planner.plan_fft_inverse(n);

        let i = Complex64::new(0.0, 1.0);
        let one = Complex64::new(1.0, 0.0);
        let mut implicit = Vec::new();
        let mut explicit = Vec::new();
        let linear = |coef: &Expr, factor: Complex64, p: u32, implicit: &mut Vec<ImplicitTerm>, explicit: &mut Vec<ExplicitTerm>| {
            if coef.uses_space() {
                explicit.push(ExplicitTerm { coef: Coef::new(coef, &x), expr: coef.clone(), factor, kind: Explicit::Linear { p } });
            } else {
                let symbol = derivative_symbol(&k, p).into_iter().map(|s| s * factor).collect();
                implicit.push(ImplicitTerm { coef: coef.clone(), symbol });
            }
        };
        let mut filter = None;
        match &problem.equation {
            Equation::Transport1d { speed } => linear(speed, one, 1, &mut implicit, &mut explicit),
            Equation::Heat1d { diffusivity } => linear(diffusivity, one, 2, &mut implicit, &mut explicit),
            Equation::Kdv1d { advection, dispersion } => {
                explicit.push(ExplicitTerm { coef: Coef::new(advection, &x), expr: advection.clone(), factor: one, kind: Explicit::Advect });
                linear(dispersion, one, 3, &mut implicit, &mut explicit);
            }
            Equation::Schrodinger1dSystem { diffusion, potential } => {
                // psi_t = -i a psi_xx + i V psi
                linear(diffusion, -i, 2, &mut implicit, &mut explicit);
                linear(potential, i, 0, &mut implicit, &mut explicit);
            }
            Equation::Burgers1d { advection, .. } => {
                explicit.push(ExplicitTerm { coef: Coef::new(advection, &x), expr: advection.clone(), factor: one, kind: Explicit::Advect });
                filter = Some(k.iter().map(|kj| (-36.0 * (kj.abs() / kmax).powi(36)).exp()).collect());
            }
            Equation::CircularFlow2d => unreachable!("handled before the spectral path"),
        }

        let u0 = problem.initial.profile(&fine)?.sample(&fine);
        let psi0: Vec<Complex64> = match &problem.initial_v {
            Some(v) => {
                let v0 = v.profile(&fine)?.sample(&fine);
                u0.iter().zip(v0.iter()).map(|(&a, &b)| Complex64::new(a, b)).collect()
            }
            None => u0.iter().map(|&a| Complex64::new(a, 0.0)).collect(),
        };
        if psi0.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(SolveError::InvalidProblem("initial condition is not finite".into()));
        }
        Ok(SpectralRun { problem, n, x, k, kmax, implicit, explicit, filter, psi0, fine, fwd, inv })
    }

    // largest |c| over the fine space grid and a sample of times
    fn coef_bound(&self, e: &Expr) -> f64 {
        let g = &self.fine;
        let nt = g.time_points();
        let samples = nt.min(257);
        let t_end = g.time(nt - 1) + g.dt();
        let mut m = 0.0f64;
        for s in 0..samples {
            let t = g.time(0) + (t_end - g.time(0)) * s as f64 / (samples - 1).max(1) as f64;
            for &xi in &self.x {
                m = m.max(e.eval(xi, 0.0, t).abs());
            }
        }
        m
    }

    fn substeps(&self) -> Result<(usize, f64), SolveError> {
        let amp = self.psi0.iter().fold(0.0f64, |m, z| m.max(z.norm()));
        let mut rho = 0.0;
        for term in &self.explicit {
            let c = self.coef_bound(&term.expr) * term.factor.norm();
            rho += match term.kind {
                Explicit::Linear { p } => c * self.kmax.powi(p as i32),
                Explicit::Advect => c * amp * self.kmax,
            };
        }
        let dt = self.fine.dt();
        let ratio = dt * rho / RK4_STABILITY_RADIUS;
        let needed = (ratio.ceil() as usize).max(1);
        let chosen = self.problem.solver.substeps.unwrap_or(needed);
        let limit = self.problem.solver.max_substeps;
        if needed > limit || chosen < needed {
            return Err(SolveError::StabilityViolation {
                scheme: "integrating-factor RK4",
                ratio,
                needed,
                limit: if chosen < needed { chosen } else { limit },
            });
        }
        Ok((chosen, ratio))
    }

    fn fft(&self, buf: &mut [Complex64]) {
        self.fwd.process(buf);
    }

    fn ifft(&self, buf: &mut [Complex64]) {
        self.inv.process(buf);
        let s = 1.0 / self.n as f64;
        buf.iter_mut().for_each(|z| *z *= s);
    }

    // explicit right-hand side in Fourier space
    fn rhs(&self, hat: &[Complex64], t: f64, out: &mut [Complex64], work: &mut Work) {
        out.iter_mut().for_each(|z| *z = Complex64::new(0.0, 0.0));
        if self.explicit.is_empty() {
            return;
        }
        work.phys.copy_from_slice(hat);
        self.ifft(&mut work.phys);
        work.acc.iter_mut().for_each(|z| *z = Complex64::new(0.0, 0.0));
        for term in &self.explicit {
            term.coef.fill(&self.x, t, &mut work.coef);
            match term.kind {
                Explicit::Linear { p } => {
                    if p == 0 {
                        work.deriv.copy_from_slice(&work.phys);
                    } else {
                        let sym = derivative_symbol(&self.k, p);
                        work.deriv.iter_mut().zip(hat).zip(&sym).for_each(|((d, h), s)| *d = h * s);
                        self.ifft(&mut work.deriv);
                    }
                    for j in 0..self.n {
                        work.acc[j] += term.factor * work.coef[j] * work.deriv[j];
                    }
                }
                Explicit::Advect => {
                    work.deriv.iter_mut().zip(hat).zip(&work.d1).for_each(|((d, h), s)| *d = h * s);
                    self.ifft(&mut work.deriv);
                    for j in 0..self.n {
                        work.acc[j] += term.factor * work.coef[j] * work.phys[j] * work.deriv[j];
                    }
                }
            }
        }
        out.copy_from_slice(&work.acc);
        self.fft(out);
    }

    // exp(sum symbol * int_a^b c)
    fn propagator(&self, a: f64, b: f64, out: &mut [Complex64]) {
        out.iter_mut().for_each(|z| *z = Complex64::new(0.0, 0.0));
        for term in &self.implicit {
            let w = match term.coef.as_constant() {
                Some(v) => v * (b - a),
                None => gauss_legendre(|t| term.coef.eval(0.0, 0.0, t), a, b),
            };
            out.iter_mut().zip(&term.symbol).for_each(|(o, s)| *o += s * w);
        }
        out.iter_mut().for_each(|z| *z = z.exp());
    }

    fn max_slope(&self, hat: &[Complex64], work: &mut Work) -> f64 {
        work.deriv.iter_mut().zip(hat).zip(&work.d1).for_each(|((d, h), s)| *d = h * s);
        self.ifft(&mut work.deriv);
        work.deriv.iter().fold(0.0f64, |m, z| m.max(z.re.abs()))
    }

    fn integrate(&self) -> Result<(SpaceTimeGrid, Vec<(String, ArrayD<f64>)>, serde_json::Value), SolveError> {
        let (nsub, ratio) = self.substeps()?;
        let g = &self.problem.grid;
        let [sx, st] = self.problem.solver.oversample;
        let nx = g.space_points()[0];
        let nt = g.time_points();
        let n = self.n;
        let zero = Complex64::new(0.0, 0.0);
        let mut work = Work {
            phys: vec![zero; n],
            deriv: vec![zero; n],
            acc: vec![zero; n],
            coef: vec![0.0; n],
            d1: derivative_symbol(&self.k, 1),
        };

        let mut u = vec![0.0; nx * nt];
        let mut v = vec![0.0; nx * nt];
        let mut store = |k: usize, hat: &[Complex64], work: &mut Work| {
            work.phys.copy_from_slice(hat);
            self.ifft(&mut work.phys);
            for i in 0..nx {
                let z = work.phys[i * sx];
                u[i * nt + k] = z.re;
                v[i * nt + k] = z.im;
            }
        };

        let mut hat = self.psi0.clone();
        self.fft(&mut hat);
        store(0, &hat, &mut work);

        let slope_cap = match &self.problem.equation {
            Equation::Burgers1d { max_slope_factor, .. } => {
                let s0 = self.max_slope(&hat, &mut work);
                if s0 > 0.0 {
                    Some(max_slope_factor * s0)
                } else {
                    None
                }
            }
            _ => None,
        };

        let h = self.fine.dt() / nsub as f64;
        let const_prop = self.implicit.iter().all(|t| t.coef.as_constant().is_some());
        let mut p_half = vec![zero; n];
        let mut p_half2 = vec![zero; n];
        let mut p_full = vec![zero; n];
        let refresh = |a: f64, p_half: &mut Vec<Complex64>, p_half2: &mut Vec<Complex64>, p_full: &mut Vec<Complex64>| {
            self.propagator(a, a + 0.5 * h, p_half);
            self.propagator(a + 0.5 * h, a + h, p_half2);
            for j in 0..n {
                p_full[j] = p_half[j] * p_half2[j];
            }
        };
        refresh(self.fine.time(0), &mut p_half, &mut p_half2, &mut p_full);

        let mut k1 = vec![zero; n];
        let mut k2 = vec![zero; n];
        let mut k3 = vec![zero; n];
        let mut k4 = vec![zero; n];
        let mut stage = vec![zero; n];
        let mut kept = nt;
        let mut truncated_at = None;
        'outer: for kf in 1..self.fine.time_points() {
            for s in 0..nsub {
                let t = self.fine.time(kf - 1) + s as f64 * h;
                if !const_prop {
                    refresh(t, &mut p_half, &mut p_half2, &mut p_full);
                }
                let tm = t + 0.5 * h;
                self.rhs(&hat, t, &mut k1, &mut work);
                for j in 0..n {
                    stage[j] = p_half[j] * (hat[j] + 0.5 * h * k1[j]);
                }
                self.rhs(&stage, tm, &mut k2, &mut work);
                for j in 0..n {
                    stage[j] = p_half[j] * hat[j] + 0.5 * h * k2[j];
                }
                self.rhs(&stage, tm, &mut k3, &mut work);
                for j in 0..n {
                    stage[j] = p_full[j] * hat[j] + h * p_half2[j] * k3[j];
                }
                self.rhs(&stage, t + h, &mut k4, &mut work);
                for j in 0..n {
                    hat[j] = p_full[j] * (hat[j] + h / 6.0 * k1[j]) + h / 3.0 * p_half2[j] * (k2[j] + k3[j]) + h / 6.0 * k4[j];
                }
                if let Some(f) = &self.filter {
                    hat.iter_mut().zip(f).for_each(|(z, w)| *z *= w);
                }
            }
            if hat.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
                return Err(SolveError::NonFinite(self.fine.time(kf)));
            }
            if let Some(cap) = slope_cap {
                if self.max_slope(&hat, &mut work) > cap {
                    kept = kf.div_ceil(st);
                    truncated_at = Some(self.fine.time(kf));
                    break 'outer;
                }
            }
            if kf % st == 0 {
                store(kf / st, &hat, &mut work);
            }
        }

        let grid = if kept < nt { g.truncated_in_time(kept)? } else { g.clone() };
        let to_array = |data: &[f64]| {
            ArrayD::from_shape_fn(IxDyn(&[nx, kept]), |ix| data[ix[0] * nt + ix[1]])
        };
        let mut fields = vec![("u".to_string(), to_array(&u))];
        if self.problem.initial_v.is_some() {
            fields.push(("v".to_string(), to_array(&v)));
        }
        let extra = serde_json::json!({
            "scheme": "fourier pseudo-spectral, integrating-factor RK4",
            "substeps": nsub,
            "stability_ratio": ratio,
            "truncated_at": truncated_at,
        });
        Ok((grid, fields, extra))
    }
}

struct Work {
    phys: Vec<Complex64>,
    deriv: Vec<Complex64>,
    acc: Vec<Complex64>,
    coef: Vec<f64>,
    d1: Vec<Complex64>,
}
