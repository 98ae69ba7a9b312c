//! Truncated univariate Taylor series ("jets").
//!
//! A [`Jet`] stores the Taylor coefficients `c_k = f^(k)(x0) / k!` of a
//! function around a point up to [`JET_ORDER`]. Arithmetic and elementary
//! functions propagate the coefficients exactly (up to rounding), so evaluating
//! a closed-form expression on the seed jet `x0 + h` yields all spatial
//! derivatives at once. This is what the exact-feature sources use.

use std::ops::{Add, Div, Mul, Neg, Sub};

/// Highest derivative order carried by a [`Jet`].
pub const JET_ORDER: usize = 6;
const LEN: usize = JET_ORDER + 1;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Jet {
    c: [f64; LEN],
}

impl Jet {
    pub fn constant(v: f64) -> Self {
        let mut c = [0.0; LEN];
        c[0] = v;
        Jet { c }
    }

    /// The identity jet `x0 + h`.
    pub fn variable(x0: f64) -> Self {
        let mut c = [0.0; LEN];
        c[0] = x0;
        c[1] = 1.0;
        Jet { c }
    }

    pub fn from_coefficients(c: [f64; LEN]) -> Self {
        Jet { c }
    }

    pub fn value(&self) -> f64 {
        self.c[0]
    }

    pub fn coefficient(&self, k: usize) -> f64 {
        self.c[k]
    }

    /// `k`-th derivative at the expansion point.
    pub fn derivative(&self, k: usize) -> f64 {
        assert!(k <= JET_ORDER, "derivative order {k} exceeds jet order");
        self.c[k] * factorial(k)
    }

    pub fn is_finite(&self) -> bool {
        self.c.iter().all(|v| v.is_finite())
    }

    pub fn exp(self) -> Self {
        let a = &self.c;
        let mut e = [0.0; LEN];
        e[0] = a[0].exp();
        for k in 1..LEN {
            let mut s = 0.0;
            for j in 1..=k {
                s += j as f64 * a[j] * e[k - j];
            }
            e[k] = s / k as f64;
        }
        Jet { c: e }
    }

    pub fn ln(self) -> Self {
        let a = &self.c;
        let mut l = [0.0; LEN];
        l[0] = a[0].ln();
        for k in 1..LEN {
            let mut s = 0.0;
            for j in 1..k {
                s += j as f64 * l[j] * a[k - j];
            }
            l[k] = (a[k] - s / k as f64) / a[0];
        }
        Jet { c: l }
    }

    pub fn sin_cos(self) -> (Self, Self) {
        let a = &self.c;
        let mut s = [0.0; LEN];
        let mut c = [0.0; LEN];
        s[0] = a[0].sin();
        c[0] = a[0].cos();
        for k in 1..LEN {
            let mut ss = 0.0;
            let mut cc = 0.0;
            for j in 1..=k {
                ss += j as f64 * a[j] * c[k - j];
                cc += j as f64 * a[j] * s[k - j];
            }
            s[k] = ss / k as f64;
            c[k] = -cc / k as f64;
        }
        (Jet { c: s }, Jet { c })
    }

    pub fn sin(self) -> Self {
        self.sin_cos().0
    }

    pub fn cos(self) -> Self {
        self.sin_cos().1
    }

    pub fn sqrt(self) -> Self {
        let a = &self.c;
        let mut r = [0.0; LEN];
        r[0] = a[0].sqrt();
        for k in 1..LEN {
            let mut s = 0.0;
            for j in 1..k {
                s += r[j] * r[k - j];
            }
            r[k] = (a[k] - s) / (2.0 * r[0]);
        }
        Jet { c: r }
    }

    pub fn tanh(self) -> Self {
        // t' = (1 - t^2) a'
        let a = &self.c;
        let mut t = [0.0; LEN];
        let mut w = [0.0; LEN];
        t[0] = a[0].tanh();
        w[0] = 1.0 - t[0] * t[0];
        for k in 1..LEN {
            let mut s = 0.0;
            for j in 1..=k {
                s += j as f64 * a[j] * w[k - j];
            }
            t[k] = s / k as f64;
            let mut sq = 0.0;
            for i in 0..=k {
                sq += t[i] * t[k - i];
            }
            w[k] = -sq;
        }
        Jet { c: t }
    }

    /// Formal derivative of the series with respect to the expansion variable.
    fn d(self) -> Self {
        let mut c = [0.0; LEN];
        for k in 0..JET_ORDER {
            c[k] = (k + 1) as f64 * self.c[k + 1];
        }
        Jet { c }
    }

    /// Antiderivative with the given constant term.
    fn integrate(self, c0: f64) -> Self {
        let mut c = [0.0; LEN];
        c[0] = c0;
        for k in 1..LEN {
            c[k] = self.c[k - 1] / k as f64;
        }
        Jet { c }
    }

    pub fn atan(self) -> Self {
        let q = self.d() / (Jet::constant(1.0) + self * self);
        q.integrate(self.c[0].atan())
    }

    pub fn atan2(self, x: Self) -> Self {
        let y = self;
        let q = (x * y.d() - y * x.d()) / (x * x + y * y);
        q.integrate(y.c[0].atan2(x.c[0]))
    }

    pub fn abs(self) -> Self {
        if self.c[0] < 0.0 {
            -self
        } else {
            self
        }
    }

    pub fn powi(self, n: i32) -> Self {
        if n < 0 {
            return Jet::constant(1.0) / self.powi(-n);
        }
        let mut acc = Jet::constant(1.0);
        let mut base = self;
        let mut e = n as u32;
        while e > 0 {
            if e & 1 == 1 {
                acc = acc * base;
            }
            base = base * base;
            e >>= 1;
        }
        acc
    }

    pub fn powf(self, p: f64) -> Self {
        if p.fract() == 0.0 && p.abs() < 64.0 {
            return self.powi(p as i32);
        }
        (self.ln() * Jet::constant(p)).exp()
    }
}

fn factorial(k: usize) -> f64 {
    (1..=k).map(|i| i as f64).product()
}

impl Add for Jet {
    type Output = Jet;
    fn add(mut self, rhs: Jet) -> Jet {
        for k in 0..LEN {
            self.c[k] += rhs.c[k];
        }
        self
    }
}

impl Sub for Jet {
    type Output = Jet;
    fn sub(mut self, rhs: Jet) -> Jet {
        for k in 0..LEN {
            self.c[k] -= rhs.c[k];
        }
        self
    }
}

impl Mul for Jet {
    type Output = Jet;
    fn mul(self, rhs: Jet) -> Jet {
        let mut c = [0.0; LEN];
        for i in 0..LEN {
            if self.c[i] == 0.0 {
                continue;
            }
            for j in 0..LEN - i {
                c[i + j] += self.c[i] * rhs.c[j];
            }
        }
        Jet { c }
    }
}

impl Div for Jet {
    type Output = Jet;
    fn div(self, rhs: Jet) -> Jet {
        let mut q = [0.0; LEN];
        for k in 0..LEN {
            let mut s = self.c[k];
            for j in 1..=k {
                s -= rhs.c[j] * q[k - j];
            }
            q[k] = s / rhs.c[0];
        }
        Jet { c: q }
    }
}

impl Neg for Jet {
    type Output = Jet;
    fn neg(mut self) -> Jet {
        for v in &mut self.c {
            *v = -*v;
        }
        self
    }
}

/// Scalar types an expression can be evaluated over.
pub trait Scalar:
    Copy + Add<Output = Self> + Sub<Output = Self> + Mul<Output = Self> + Div<Output = Self> + Neg<Output = Self>
{
    fn lift(v: f64) -> Self;
    fn value(&self) -> f64;
    fn sin(self) -> Self;
    fn cos(self) -> Self;
    fn tan(self) -> Self {
        self.sin() / self.cos()
    }
    fn exp(self) -> Self;
    fn ln(self) -> Self;
    fn sqrt(self) -> Self;
    fn tanh(self) -> Self;
    fn atan(self) -> Self;
    fn atan2(self, x: Self) -> Self;
    fn abs(self) -> Self;
    fn powf(self, p: f64) -> Self;
}

impl Scalar for f64 {
    fn lift(v: f64) -> Self {
        v
    }
    fn value(&self) -> f64 {
        *self
    }
    fn sin(self) -> Self {
        f64::sin(self)
    }
    fn cos(self) -> Self {
        f64::cos(self)
    }
    fn tan(self) -> Self {
        f64::tan(self)
    }
    fn exp(self) -> Self {
        f64::exp(self)
    }
    fn ln(self) -> Self {
        f64::ln(self)
    }
    fn sqrt(self) -> Self {
        f64::sqrt(self)
    }
    fn tanh(self) -> Self {
        f64::tanh(self)
    }
    fn atan(self) -> Self {
        f64::atan(self)
    }
    fn atan2(self, x: Self) -> Self {
        f64::atan2(self, x)
    }
    fn abs(self) -> Self {
        f64::abs(self)
    }
    fn powf(self, p: f64) -> Self {
        f64::powf(self, p)
    }
}

impl Scalar for Jet {
    fn lift(v: f64) -> Self {
        Jet::constant(v)
    }
    fn value(&self) -> f64 {
        self.c[0]
    }
    fn sin(self) -> Self {
        Jet::sin(self)
    }
    fn cos(self) -> Self {
        Jet::cos(self)
    }
    fn exp(self) -> Self {
        Jet::exp(self)
    }
    fn ln(self) -> Self {
        Jet::ln(self)
    }
    fn sqrt(self) -> Self {
        Jet::sqrt(self)
    }
    fn tanh(self) -> Self {
        Jet::tanh(self)
    }
    fn atan(self) -> Self {
        Jet::atan(self)
    }
    fn atan2(self, x: Self) -> Self {
        Jet::atan2(self, x)
    }
    fn abs(self) -> Self {
        Jet::abs(self)
    }
    fn powf(self, p: f64) -> Self {
        Jet::powf(self, p)
    }
}
