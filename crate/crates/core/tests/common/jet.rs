//! Second-order Taylor jets in up to three variables.

use std::ops::{Add, Mul, Neg, Sub};

pub const MAX_VARS: usize = 3;

/// Value, gradient and Hessian of a function at a point.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Jet2 {
    pub v: f64,
    pub g: [f64; MAX_VARS],
    pub h: [[f64; MAX_VARS]; MAX_VARS],
}

impl Jet2 {
    pub fn constant(v: f64) -> Self {
        Jet2 { v, ..Default::default() }
    }

    /// The coordinate `x_i` around `value`.
    pub fn variable(i: usize, value: f64) -> Self {
        let mut j = Jet2::constant(value);
        j.g[i] = 1.0;
        j
    }

    /// The same function with its constant term removed.
    pub fn centered(self) -> Self {
        Jet2 { v: 0.0, ..self }
    }

    pub fn exp(self) -> Self {
        let e = self.v.exp();
        let mut out = Jet2::constant(e);
        for i in 0..MAX_VARS {
            out.g[i] = e * self.g[i];
            for j in 0..MAX_VARS {
                out.h[i][j] = e * (self.h[i][j] + self.g[i] * self.g[j]);
            }
        }
        out
    }

    pub fn powi(self, n: u32) -> Self {
        (0..n).fold(Jet2::constant(1.0), |acc, _| acc * self)
    }
}

impl Add for Jet2 {
    type Output = Jet2;
    fn add(mut self, o: Jet2) -> Jet2 {
        self.v += o.v;
        for i in 0..MAX_VARS {
            self.g[i] += o.g[i];
            for j in 0..MAX_VARS {
                self.h[i][j] += o.h[i][j];
            }
        }
        self
    }
}

impl Sub for Jet2 {
    type Output = Jet2;
    fn sub(self, o: Jet2) -> Jet2 {
        self + (-o)
    }
}

impl Neg for Jet2 {
    type Output = Jet2;
    fn neg(self) -> Jet2 {
        self * -1.0
    }
}

impl Add<f64> for Jet2 {
    type Output = Jet2;
    fn add(mut self, c: f64) -> Jet2 {
        self.v += c;
        self
    }
}

impl Mul<f64> for Jet2 {
    type Output = Jet2;
    fn mul(mut self, c: f64) -> Jet2 {
        self.v *= c;
        for i in 0..MAX_VARS {
            self.g[i] *= c;
            for j in 0..MAX_VARS {
                self.h[i][j] *= c;
            }
        }
        self
    }
}

impl Mul for Jet2 {
    type Output = Jet2;
    fn mul(self, o: Jet2) -> Jet2 {
        let mut out = Jet2::constant(self.v * o.v);
        for i in 0..MAX_VARS {
            out.g[i] = self.g[i] * o.v + self.v * o.g[i];
            for j in 0..MAX_VARS {
                out.h[i][j] =
                    self.h[i][j] * o.v + self.v * o.h[i][j] + self.g[i] * o.g[j] + o.g[i] * self.g[j];
            }
        }
        out
    }
}

/// Scalar arithmetic shared by `f64` and [`Jet2`], for generic payoffs.
pub trait Scalar: Copy + Add<Output = Self> + Mul<Output = Self> + Mul<f64, Output = Self> {
    fn from_f64(v: f64) -> Self;
}

impl Scalar for f64 {
    fn from_f64(v: f64) -> Self {
        v
    }
}

impl Scalar for Jet2 {
    fn from_f64(v: f64) -> Self {
        Jet2::constant(v)
    }
}
