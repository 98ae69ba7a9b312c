use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector};
use ndarray::ArrayD;
use rustfft::num_complex::Complex64;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use super::svd::singular_values;
use super::SpectralError;
use crate::caslr::{lstsq, SVD_RCOND};
use crate::features::{multi_indices, Factor, MultiIndex};

/// Modes weaker than this fraction of the strongest are not used.
pub const DEFAULT_MODE_FLOOR: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectralOptions {
    /// Highest derivative order `n` of the operator.
    pub order: usize,
    /// Integer DFT indices `(m_x, m_y)` to use; all resolved modes above the
    /// floor when absent.
    #[serde(default)]
    pub modes: Option<Vec<[i64; 2]>>,
    #[serde(default = "default_floor")]
    pub mode_floor: f64,
}

fn default_floor() -> f64 {
    DEFAULT_MODE_FLOOR
}

impl Default for SpectralOptions {
    fn default() -> Self {
        SpectralOptions { order: 2, modes: None, mode_floor: DEFAULT_MODE_FLOOR }
    }
}

/// Result of the two decoupled Fourier-domain regressions.
///
/// The operator is written `u_t = sum_alpha p_alpha d^alpha u`, so that each
/// mode evolves by `exp(sum_alpha p_alpha (i zeta)^alpha t)`. With
/// `c_alpha = p_alpha i^|alpha|` for even orders and
/// `c_alpha = p_alpha i^(|alpha|-1)` for odd ones, `log|ratio| / dt` is the
/// even polynomial and `Arg(ratio) / dt` the odd one.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectralIdentification {
    pub even: Vec<(MultiIndex, f64)>,
    pub odd: Vec<(MultiIndex, f64)>,
    /// `p_alpha` by total order.
    pub coefficients: Vec<(MultiIndex, f64)>,
    pub modes: Vec<[i64; 2]>,
    /// Physical wavenumbers `2 pi m / L` of `modes`.
    pub wavenumbers: Vec<[f64; 2]>,
    pub even_residual: f64,
    pub odd_residual: f64,
}

impl SpectralIdentification {
    pub fn coefficient(&self, alpha: MultiIndex) -> f64 {
        self.coefficients.iter().find(|(a, _)| *a == alpha).map_or(0.0, |(_, v)| *v)
    }

    /// `(feature name, p)` pairs, e.g. `("u_xx", 4.0)`.
    pub fn named(&self, field: &str) -> Vec<(String, f64)> {
        self.coefficients.iter().map(|(a, v)| (Factor::new(field, *a).to_string(), *v)).collect()
    }
}

fn order(a: &MultiIndex) -> usize {
    (a[0] + a[1]) as usize
}

/// Modes needed for uniqueness: the larger of the counts of even- and
/// odd-degree monomials of degree at most `n` in `d` variables.
pub fn required_modes(space_dim: usize, n: usize) -> usize {
    let all = multi_indices(space_dim, n);
    let even = all.iter().filter(|a| order(a) % 2 == 0).count();
    (all.len() - even).max(even)
}

fn spectrum(u: &ArrayD<f64>) -> Vec<Complex64> {
    let shape = u.shape().to_vec();
    let mut data: Vec<Complex64> = u.as_standard_layout().iter().map(|&v| Complex64::new(v, 0.0)).collect();
    let mut planner = FftPlanner::new();
    if shape.len() == 1 {
        planner.plan_fft_forward(shape[0]).process(&mut data);
        return data;
    }
    let (nx, ny) = (shape[0], shape[1]);
    // rows are contiguous along y
    planner.plan_fft_forward(ny).process(&mut data);
    let fx = planner.plan_fft_forward(nx);
    let mut col = vec![Complex64::new(0.0, 0.0); nx];
    for j in 0..ny {
        for i in 0..nx {
            col[i] = data[i * ny + j];
        }
        fx.process(&mut col);
        for i in 0..nx {
            data[i * ny + j] = col[i];
        }
    }
    data
}

fn resolved(m: i64, n: usize) -> Option<usize> {
    // the Nyquist mode of an even grid is real and carries no phase
    if 2 * m.unsigned_abs() as usize >= n {
        return None;
    }
    Some(if m >= 0 { m as usize } else { (n as i64 + m) as usize })
}

fn flat(mode: [i64; 2], shape: &[usize]) -> Option<usize> {
    let i = resolved(mode[0], shape[0])?;
    if shape.len() == 1 {
        return (mode[1] == 0).then_some(i);
    }
    Some(i * shape[1] + resolved(mode[1], shape[1])?)
}

// one representative of every conjugate pair of resolved modes
fn half_space(shape: &[usize]) -> Vec<[i64; 2]> {
    let range = |n: usize| {
        let h = ((n as i64) - 1) / 2;
        -h..=h
    };
    let mut out = Vec::new();
    if shape.len() == 1 {
        for m in 0..=((shape[0] as i64) - 1) / 2 {
            out.push([m, 0]);
        }
        return out;
    }
    for my in range(shape[1]) {
        for mx in range(shape[0]) {
            if my > 0 || (my == 0 && mx >= 0) {
                out.push([mx, my]);
            }
        }
    }
    out
}

fn monomial(z: [f64; 2], a: &MultiIndex) -> f64 {
    z[0].powi(a[0] as i32) * z[1].powi(a[1] as i32)
}

struct Fit {
    coef: Vec<f64>,
    residual: f64,
}

fn regress(rows: &[[f64; 2]], alphas: &[MultiIndex], rhs: &[f64], system: &'static str) -> Result<Fit, SpectralError> {
    if alphas.is_empty() {
        return Ok(Fit { coef: vec![], residual: rhs.iter().map(|v| v * v).sum() });
    }
    let mut a = DMatrix::from_fn(rows.len(), alphas.len(), |r, c| monomial(rows[r], &alphas[c]));
    let scales: Vec<f64> = a.column_iter().map(|c| c.norm()).collect();
    for (j, mut c) in a.column_iter_mut().enumerate() {
        if scales[j] > 0.0 {
            c /= scales[j];
        }
    }
    let sv = singular_values(&a);
    let rank = sv.iter().filter(|&&s| s > SVD_RCOND * sv[0]).count();
    if rank < alphas.len() || scales.iter().any(|&s| s == 0.0) {
        return Err(SpectralError::DegenerateModes { system, rank, needed: alphas.len() });
    }
    let sol = lstsq(&a, &DVector::from_column_slice(rhs));
    Ok(Fit { coef: sol.coef.iter().zip(&scales).map(|(c, s)| c / s).collect(), residual: sol.residual })
}

/// Identifies a constant-coefficient linear operator from two snapshots of
/// one periodic trajectory taken `dt` apart. `lengths` are the domain
/// periods per axis.
pub fn identify_constant_coeff(
    snap1: &ArrayD<f64>,
    snap2: &ArrayD<f64>,
    lengths: &[f64],
    dt: f64,
    opts: &SpectralOptions,
) -> Result<SpectralIdentification, SpectralError> {
    let shape = snap1.shape().to_vec();
    let d = shape.len();
    if snap1.is_empty() || !(1..=2).contains(&d) || snap2.shape() != shape.as_slice() || lengths.len() != d {
        return Err(SpectralError::ShapeMismatch);
    }
    if !(dt > 0.0) || !dt.is_finite() {
        return Err(SpectralError::BadInterval(dt));
    }
    let h1 = spectrum(snap1);
    let h2 = spectrum(snap2);
    let peak = h1.iter().map(|c| c.norm()).fold(0.0, f64::max);
    let floor = opts.mode_floor * peak;
    let modes: Vec<[i64; 2]> = match &opts.modes {
        Some(q) => {
            for &m in q {
                let i = flat(m, &shape).ok_or(SpectralError::UnresolvedMode { mode: m })?;
                let magnitude = h1[i].norm();
                if !(magnitude >= floor) || magnitude == 0.0 {
                    return Err(SpectralError::WeakMode { mode: m, magnitude, floor });
                }
            }
            q.clone()
        }
        None => half_space(&shape)
            .into_iter()
            .filter(|&m| {
                let v = h1[flat(m, &shape).expect("half space is resolved")].norm();
                v >= floor && v > 0.0
            })
            .collect(),
    };
    let needed = required_modes(d, opts.order);
    if modes.len() < needed {
        return Err(SpectralError::InsufficientModes { got: modes.len(), needed });
    }
    let mut zetas = Vec::with_capacity(modes.len());
    let mut y_even = Vec::with_capacity(modes.len());
    let mut y_odd = Vec::with_capacity(modes.len());
    for &m in &modes {
        let i = flat(m, &shape).expect("validated");
        let ratio = h2[i] / h1[i];
        let arg = ratio.arg();
        if arg.abs() >= PI * (1.0 - 1e-6) {
            return Err(SpectralError::PhaseAmbiguity { mode: m, arg });
        }
        let mut z = [0.0; 2];
        for a in 0..d {
            z[a] = 2.0 * PI * m[a] as f64 / lengths[a];
        }
        zetas.push(z);
        y_even.push(ratio.norm().ln() / dt);
        y_odd.push(arg / dt);
    }
    let all = multi_indices(d, opts.order);
    let (ev, od): (Vec<MultiIndex>, Vec<MultiIndex>) = all.iter().partition(|a| order(a) % 2 == 0);
    let fe = regress(&zetas, &ev, &y_even, "even")?;
    let fo = regress(&zetas, &od, &y_odd, "odd")?;
    let even: Vec<(MultiIndex, f64)> = ev.iter().cloned().zip(fe.coef).collect();
    let odd: Vec<(MultiIndex, f64)> = od.iter().cloned().zip(fo.coef).collect();
    // i^|a| is (-1)^(|a|/2) for even |a|; i^(|a|-1) is (-1)^((|a|-1)/2) for odd
    let sign = |a: &MultiIndex| if (order(a) / 2) % 2 == 0 { 1.0 } else { -1.0 };
    let coefficients = all
        .iter()
        .map(|a| {
            let c = even.iter().chain(&odd).find(|(b, _)| b == a).expect("partition covers all").1;
            (*a, c * sign(a))
        })
        .collect();
    Ok(SpectralIdentification {
        even,
        odd,
        coefficients,
        modes,
        wavenumbers: zetas,
        even_residual: fe.residual,
        odd_residual: fo.residual,
    })
}
