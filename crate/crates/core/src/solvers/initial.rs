use ndarray::{ArrayD, IxDyn};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::{SolveError, SpaceTimeGrid};
use crate::expr::Expr;
use crate::jet::Scalar;

fn one() -> f64 {
    1.0
}

/// One term `amplitude * sin(pi*frequency*(x + shift))` (or `cos` when `cosine`).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Sinusoid {
    pub amplitude: f64,
    pub frequency: f64,
    #[serde(default)]
    pub shift: f64,
    #[serde(default)]
    pub cosine: bool,
}

/// Initial-data families used by the benchmarks.
///
/// `square`, `hat` and `int` live on `[-8, 8)` with support in `[-4, 4]`;
/// `hat` and `int` are successive images of `square` under the smoothing map
/// [`g_map`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum InitialCondition {
    /// `offset + a0 + sqrt(2) * sum_j (a_j cos(pi j x/L) + b_j sin(pi j x/L))`,
    /// all amplitudes drawn from `N(0, 1/(2M+1))`; `L` defaults to half the domain length.
    RandomFourier {
        modes: usize,
        seed: u64,
        #[serde(default)]
        offset: f64,
        #[serde(default)]
        half_period: Option<f64>,
    },
    /// `amplitude * exp(-1/(1-z^2))` with `z = (x - center)/half_width`, zero for `|z| >= 1`.
    Bump {
        #[serde(default)]
        center: f64,
        #[serde(default = "one")]
        half_width: f64,
        #[serde(default = "one")]
        amplitude: f64,
    },
    Square,
    Hat,
    Int,
    SinusoidSum {
        terms: Vec<Sinusoid>,
        #[serde(default)]
        offset: f64,
    },
    /// Any closed form in `x` (and `y` in 2D).
    Custom { expr: Expr },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FourierTerm {
    pub omega: f64,
    pub cos: f64,
    pub sin: f64,
}

#[derive(Debug, Clone, PartialEq)]
enum Shape {
    Fourier { offset: f64, terms: Vec<FourierTerm> },
    Bump { center: f64, half_width: f64, amplitude: f64 },
    Square,
    Hat,
    Int,
    Expr(Expr),
}

/// An initial condition resolved against a concrete domain, evaluable at
/// plain points or on jets.
#[derive(Debug, Clone, PartialEq)]
pub struct Profile {
    shape: Shape,
    // (left end, period) when the profile is a compactly supported shape on a periodic axis
    wrap: Option<(f64, f64)>,
}

/// Coefficients `(a_0, [(a_j, b_j)])` of the random Fourier family.
pub fn random_fourier_coefficients(modes: usize, seed: u64) -> (f64, Vec<(f64, f64)>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let sd = (1.0 / (2 * modes + 1) as f64).sqrt();
    let normal = Normal::new(0.0, sd).expect("positive standard deviation");
    let a0 = normal.sample(&mut rng);
    let pairs = (0..modes).map(|_| (normal.sample(&mut rng), normal.sample(&mut rng))).collect();
    (a0, pairs)
}

impl InitialCondition {
    pub fn profile(&self, grid: &SpaceTimeGrid) -> Result<Profile, SolveError> {
        let d = grid.space_dim();
        if d != 1 && !matches!(self, InitialCondition::Custom { .. }) {
            return Err(SolveError::Unsupported(format!("initial condition {:?} is one-dimensional", self.kind_name())));
        }
        let ext = grid.space_extent()[0];
        let wrap = if grid.is_periodic(0) && d == 1 { Some((ext[0], ext[1] - ext[0])) } else { None };
        let (shape, wrap) = match self {
            InitialCondition::RandomFourier { modes, seed, offset, half_period } => {
                let l = half_period.unwrap_or((ext[1] - ext[0]) / 2.0);
                if !(l > 0.0) {
                    return Err(SolveError::InvalidProblem("half_period must be positive".into()));
                }
                let (a0, pairs) = random_fourier_coefficients(*modes, *seed);
                let s2 = std::f64::consts::SQRT_2;
                let terms = pairs
                    .iter()
                    .enumerate()
                    .map(|(j, &(a, b))| FourierTerm {
                        omega: std::f64::consts::PI * (j + 1) as f64 / l,
                        cos: s2 * a,
                        sin: s2 * b,
                    })
                    .collect();
                (Shape::Fourier { offset: offset + a0, terms }, None)
            }
            InitialCondition::SinusoidSum { terms, offset } => {
                let terms = terms
                    .iter()
                    .map(|s| {
                        let w = std::f64::consts::PI * s.frequency;
                        let (sn, cs) = (w * s.shift).sin_cos();
                        if s.cosine {
                            FourierTerm { omega: w, cos: s.amplitude * cs, sin: -s.amplitude * sn }
                        } else {
                            FourierTerm { omega: w, cos: s.amplitude * sn, sin: s.amplitude * cs }
                        }
                    })
                    .collect();
                (Shape::Fourier { offset: *offset, terms }, None)
            }
            InitialCondition::Bump { center, half_width, amplitude } => {
                if !(*half_width > 0.0) {
                    return Err(SolveError::InvalidProblem("bump half_width must be positive".into()));
                }
                (Shape::Bump { center: *center, half_width: *half_width, amplitude: *amplitude }, wrap)
            }
            InitialCondition::Square => (Shape::Square, wrap),
            InitialCondition::Hat => (Shape::Hat, wrap),
            InitialCondition::Int => (Shape::Int, wrap),
            InitialCondition::Custom { expr } => (Shape::Expr(expr.clone()), None),
        };
        Ok(Profile { shape, wrap })
    }

    fn kind_name(&self) -> &'static str {
        match self {
            InitialCondition::RandomFourier { .. } => "random_fourier",
            InitialCondition::Bump { .. } => "bump",
            InitialCondition::Square => "square",
            InitialCondition::Hat => "hat",
            InitialCondition::Int => "int",
            InitialCondition::SinusoidSum { .. } => "sinusoid_sum",
            InitialCondition::Custom { .. } => "custom",
        }
    }
}

fn square<S: Scalar>(x: S) -> S {
    let v = x.value();
    if (-4.0..=0.0).contains(&v) {
        S::lift(1.0)
    } else if v > 0.0 && v <= 4.0 {
        S::lift(-1.0)
    } else {
        S::lift(0.0)
    }
}

fn hat<S: Scalar>(x: S) -> S {
    if x.value().abs() > 4.0 {
        return S::lift(0.0);
    }
    S::lift(2.0) - (x.abs() - S::lift(2.0)).abs()
}

// antiderivative of `hat` from -4
fn hat_integral<S: Scalar>(y: S) -> S {
    let v = y.value();
    let half = S::lift(0.5);
    if v < -4.0 {
        S::lift(0.0)
    } else if v <= -2.0 {
        let z = y + S::lift(4.0);
        half * z * z
    } else if v <= 0.0 {
        S::lift(4.0) - half * y * y
    } else if v <= 2.0 {
        S::lift(4.0) + half * y * y
    } else if v <= 4.0 {
        S::lift(4.0) * y - half * y * y
    } else {
        S::lift(8.0)
    }
}

fn int<S: Scalar>(x: S) -> S {
    if x.value().abs() > 4.0 {
        return S::lift(0.0);
    }
    S::lift(0.5) * hat_integral(S::lift(4.0) - S::lift(2.0) * x.abs())
}

fn bump<S: Scalar>(x: S, center: f64, half_width: f64, amplitude: f64) -> S {
    let z = (x - S::lift(center)) / S::lift(half_width);
    let q = S::lift(1.0) - z * z;
    // exp(-1/q) underflows long before q reaches zero
    if q.value() <= 1.0 / 700.0 {
        return S::lift(0.0);
    }
    S::lift(amplitude) * (-(S::lift(1.0) / q)).exp()
}

impl Profile {
    /// Evaluates at `(x, y)`; `y` is ignored by one-dimensional shapes.
    pub fn eval<S: Scalar>(&self, x: S, y: S) -> S {
        let x = match self.wrap {
            Some((a, p)) => {
                let n = ((x.value() - a) / p).floor();
                x - S::lift(n * p)
            }
            None => x,
        };
        match &self.shape {
            Shape::Fourier { offset, terms } => {
                let mut acc = S::lift(*offset);
                for t in terms {
                    let arg = S::lift(t.omega) * x;
                    acc = acc + S::lift(t.cos) * arg.cos() + S::lift(t.sin) * arg.sin();
                }
                acc
            }
            Shape::Bump { center, half_width, amplitude } => bump(x, *center, *half_width, *amplitude),
            Shape::Square => square(x),
            Shape::Hat => hat(x),
            Shape::Int => int(x),
            Shape::Expr(e) => e.eval_scalar(x, y, S::lift(0.0)),
        }
    }

    pub fn value(&self, x: f64, y: f64) -> f64 {
        self.eval(x, y)
    }

    /// `(offset, terms)` when the profile is a finite trigonometric sum.
    pub fn fourier_series(&self) -> Option<(f64, &[FourierTerm])> {
        match &self.shape {
            Shape::Fourier { offset, terms } => Some((*offset, terms)),
            _ => None,
        }
    }

    pub fn max_abs_on(&self, grid: &SpaceTimeGrid) -> f64 {
        let arr = self.sample(grid);
        arr.iter().fold(0.0f64, |m, v| m.max(v.abs()))
    }

    pub fn sample(&self, grid: &SpaceTimeGrid) -> ArrayD<f64> {
        let shape = grid.space_points().to_vec();
        let two_d = grid.space_dim() > 1;
        ArrayD::from_shape_fn(IxDyn(&shape), |ix| {
            let x = grid.coord(0, ix[0]);
            let y = if two_d { grid.coord(1, ix[1]) } else { 0.0 };
            self.value(x, y)
        })
    }
}

/// Samples an initial condition on the spatial part of `grid`.
pub fn make_initial(spec: &InitialCondition, grid: &SpaceTimeGrid) -> Result<ArrayD<f64>, SolveError> {
    let p = spec.profile(grid)?;
    let arr = p.sample(grid);
    if arr.iter().any(|v| !v.is_finite()) {
        return Err(SolveError::InvalidProblem("initial condition produced non-finite values".into()));
    }
    Ok(arr)
}

/// The smoothing map `G f(x) = int_{-8}^x f~(s) ds` with `f~(x) = f(2x+4)` on
/// `[-4,0]`, `-f(4-2x)` on `(0,4]`, zero elsewhere, by trapezoidal quadrature
/// on a uniform grid over `[-8, x]` with `n` panels.
pub fn g_map(f: impl Fn(f64) -> f64, x: f64, n: usize) -> f64 {
    let ft = |s: f64| {
        if (-4.0..=0.0).contains(&s) {
            f(2.0 * s + 4.0)
        } else if s > 0.0 && s <= 4.0 {
            -f(4.0 - 2.0 * s)
        } else {
            0.0
        }
    };
    if x <= -8.0 {
        return 0.0;
    }
    let h = (x + 8.0) / n as f64;
    let mut acc = 0.5 * (ft(-8.0) + ft(x));
    for i in 1..n {
        acc += ft(-8.0 + i as f64 * h);
    }
    acc * h
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::jet::Jet;

    fn grid(n: usize) -> SpaceTimeGrid {
        SpaceTimeGrid::periodic_1d(n, [-8.0, 8.0], 2, [0.0, 1.0]).unwrap()
    }

    #[test]
    fn square_values() {
        let p = InitialCondition::Square.profile(&grid(16)).unwrap();
        assert_eq!(p.value(-2.0, 0.0), 1.0);
        assert_eq!(p.value(2.0, 0.0), -1.0);
        assert_eq!(p.value(6.0, 0.0), 0.0);
    }

    #[test]
    fn random_fourier_zero_modes_is_constant() {
        let spec = InitialCondition::RandomFourier { modes: 0, seed: 11, offset: 0.0, half_period: None };
        let u = make_initial(&spec, &grid(32)).unwrap();
        let (a0, _) = random_fourier_coefficients(0, 11);
        assert!(u.iter().all(|&v| v == a0));
    }

    #[test]
    fn random_fourier_is_seeded() {
        assert_eq!(random_fourier_coefficients(4, 3), random_fourier_coefficients(4, 3));
        assert_ne!(random_fourier_coefficients(4, 3), random_fourier_coefficients(4, 4));
        assert_eq!(random_fourier_coefficients(4, 3).1.len(), 4);
    }

    #[test]
    fn hat_and_int_are_images_of_the_map() {
        let sq = |x: f64| square(x);
        let h = |x: f64| hat(x);
        let n = 1 << 16;
        for i in 0..=64 {
            let x = -8.0 + 0.25 * i as f64;
            let step = (x + 8.0) / n as f64;
            // six unit jumps in the square integrand cost at most step/2 each
            assert!((g_map(sq, x, n) - hat(x)).abs() <= 3.0 * step + 1e-12, "hat at {x}");
            assert!((g_map(h, x, n) - int(x)).abs() < 1e-7, "int at {x}");
        }
    }

    #[test]
    fn hat_is_continuous_piecewise_linear() {
        let h = 1e-6;
        for i in 0..160 {
            let x = -8.0 + 0.1 * i as f64 + 0.05;
            let jump = (hat(x + h) - hat(x - h)).abs();
            assert!(jump < 3e-6);
            let second = hat(x + 0.01) - 2.0 * hat(x) + hat(x - 0.01);
            let near_kink = [-4.0f64, -2.0, 0.0, 2.0, 4.0].iter().any(|k| (x - k).abs() < 0.011);
            if !near_kink {
                assert!(second.abs() < 1e-12);
            }
        }
    }

    #[test]
    fn bump_is_smooth_and_guarded() {
        let spec = InitialCondition::Bump { center: 0.0, half_width: 1.0, amplitude: 1.0 };
        let p = spec.profile(&grid(16)).unwrap();
        assert!((p.value(0.0, 0.0) - (-1.0f64).exp()).abs() < 1e-15);
        assert_eq!(p.value(1.0, 0.0), 0.0);
        assert_eq!(p.value(0.9999999, 0.0), 0.0);
        let j: Jet = p.eval(Jet::variable(0.999), Jet::constant(0.0));
        assert!(j.is_finite());
        // periodic image on [-8, 8)
        assert!((p.value(16.3, 0.0) - p.value(0.3, 0.0)).abs() < 1e-14);
    }

    #[test]
    fn sinusoid_sum_matches_direct_formula() {
        let spec = InitialCondition::SinusoidSum {
            terms: vec![
                Sinusoid { amplitude: 1.0, frequency: 4.0, shift: 0.1, cosine: false },
                Sinusoid { amplitude: 1.0, frequency: 2.0, shift: -0.5, cosine: true },
            ],
            offset: 0.0,
        };
        let g = SpaceTimeGrid::periodic_1d(10, [-1.0, 1.0], 2, [0.0, 1.0]).unwrap();
        let p = spec.profile(&g).unwrap();
        let pi = std::f64::consts::PI;
        for &x in &[-0.7, 0.0, 0.33] {
            let want = (4.0 * pi * (x + 0.1)).sin() + (2.0 * pi * (x - 0.5)).cos();
            assert!((p.value(x, 0.0) - want).abs() < 1e-14);
        }
    }

    #[test]
    fn jets_match_finite_differences() {
        let spec = InitialCondition::RandomFourier { modes: 3, seed: 5, offset: 0.0, half_period: None };
        let p = spec.profile(&grid(16)).unwrap();
        let x0 = 0.37;
        let j: Jet = p.eval(Jet::variable(x0), Jet::constant(0.0));
        let h = 1e-5;
        let fd = (p.value(x0 + h, 0.0) - p.value(x0 - h, 0.0)) / (2.0 * h);
        assert!((j.derivative(1) - fd).abs() < 1e-8);
    }

    #[test]
    fn two_d_needs_custom() {
        let g = SpaceTimeGrid::periodic_2d([8, 8], [-1.0, 1.0], [-1.0, 1.0], 2, [0.0, 1.0]).unwrap();
        assert!(make_initial(&InitialCondition::Square, &g).is_err());
        let spec = InitialCondition::Custom { expr: Expr::parse("x*y").unwrap() };
        let u = make_initial(&spec, &g).unwrap();
        assert_eq!(u.shape(), &[8, 8]);
        assert_eq!(u[[0, 0]], 1.0);
    }
}
