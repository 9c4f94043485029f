//! Random polynomial models and payoffs with exact derivatives.

use rand::Rng;
use unbiased_mc::linalg::{Matrix, Tensor3};
use unbiased_mc::model::{Model1D, ModelND};
use unbiased_mc::payoff::{Payoff, Smoothness};

use super::jet::Scalar;

/// `μ = m0 + m1 S + m2 S² + mt t`, `σ = s0 + s1 S + s2 S²`, constant rate.
#[derive(Debug, Clone, PartialEq)]
pub struct Poly1D {
    pub m: [f64; 3],
    pub mt: f64,
    pub s: [f64; 3],
    pub r: f64,
}

impl Poly1D {
    /// Volatility stays within `[0.2, 0.6]` on `S ∈ [0, 2]`.
    pub fn random<R: Rng>(rng: &mut R) -> Self {
        Poly1D {
            m: [rng.random_range(-0.2..0.2), rng.random_range(-0.3..0.3), rng.random_range(-0.1..0.1)],
            mt: rng.random_range(-0.1..0.1),
            s: [rng.random_range(0.3..0.4), rng.random_range(-0.05..0.05), rng.random_range(-0.02..0.02)],
            r: rng.random_range(0.0..0.05),
        }
    }
}

impl Model1D for Poly1D {
    fn mu(&self, t: f64, s: f64) -> f64 {
        self.m[0] + self.m[1] * s + self.m[2] * s * s + self.mt * t
    }
    fn sigma(&self, _t: f64, s: f64) -> f64 {
        self.s[0] + self.s[1] * s + self.s[2] * s * s
    }
    fn dmu_ds(&self, _t: f64, s: f64) -> f64 {
        self.m[1] + 2.0 * self.m[2] * s
    }
    fn dsigma_ds(&self, _t: f64, s: f64) -> f64 {
        self.s[1] + 2.0 * self.s[2] * s
    }
    fn rate(&self, _t: f64) -> f64 {
        self.r
    }
    fn constant_rate(&self) -> Option<f64> {
        Some(self.r)
    }
}

/// Quadratic drift and rate, covariance `L(x) L(x)^T + c0 I` with affine `L`.
#[derive(Debug, Clone, PartialEq)]
pub struct PolyND {
    pub d: usize,
    pub a: Vec<f64>,
    /// `b[α][β]`.
    pub b: Vec<Vec<f64>>,
    /// `q[α][β][γ]`, symmetric in `(β, γ)`; drift term `½ q x x`.
    pub q: Vec<Vec<Vec<f64>>>,
    pub l0: Vec<Vec<f64>>,
    /// `l1[δ]` is `∂_δ L`.
    pub l1: Vec<Vec<Vec<f64>>>,
    pub c0: f64,
    pub r0: f64,
    pub r1: Vec<f64>,
    /// Symmetric; rate term `½ x R2 x`.
    pub r2: Vec<Vec<f64>>,
}

impl PolyND {
    pub fn random<R: Rng>(d: usize, rng: &mut R) -> Self {
        let mut u = |lo: f64, hi: f64| rng.random_range(lo..hi);
        let a = (0..d).map(|_| u(-0.1, 0.1)).collect();
        let b = (0..d).map(|_| (0..d).map(|_| u(-0.2, 0.2)).collect()).collect();
        let mut q = vec![vec![vec![0.0; d]; d]; d];
        for al in 0..d {
            for be in 0..d {
                for ga in be..d {
                    let v = u(-0.1, 0.1);
                    q[al][be][ga] = v;
                    q[al][ga][be] = v;
                }
            }
        }
        let l0 = (0..d)
            .map(|i| (0..d).map(|j| if i == j { u(0.25, 0.4) } else { u(-0.08, 0.08) }).collect())
            .collect();
        let l1 = (0..d).map(|_| (0..d).map(|_| (0..d).map(|_| u(-0.04, 0.04)).collect()).collect()).collect();
        let mut r2 = vec![vec![0.0; d]; d];
        for i in 0..d {
            for j in i..d {
                let v = u(-0.02, 0.02);
                r2[i][j] = v;
                r2[j][i] = v;
            }
        }
        PolyND {
            d,
            a,
            b,
            q,
            l0,
            l1,
            c0: u(0.005, 0.02),
            r0: u(0.0, 0.05),
            r1: (0..d).map(|_| u(-0.05, 0.05)).collect(),
            r2,
        }
    }

    fn l(&self, x: &[f64]) -> Vec<Vec<f64>> {
        let mut l = self.l0.clone();
        for de in 0..self.d {
            for i in 0..self.d {
                for j in 0..self.d {
                    l[i][j] += self.l1[de][i][j] * x[de];
                }
            }
        }
        l
    }
}

impl ModelND for PolyND {
    fn dim(&self) -> usize {
        self.d
    }
    fn mu(&self, _t: f64, x: &[f64], out: &mut [f64]) {
        for al in 0..self.d {
            let mut v = self.a[al];
            for be in 0..self.d {
                v += self.b[al][be] * x[be];
                for ga in 0..self.d {
                    v += 0.5 * self.q[al][be][ga] * x[be] * x[ga];
                }
            }
            out[al] = v;
        }
    }
    fn cov(&self, _t: f64, x: &[f64], out: &mut Matrix) {
        let l = self.l(x);
        for i in 0..self.d {
            for j in 0..self.d {
                let mut v = if i == j { self.c0 } else { 0.0 };
                for k in 0..self.d {
                    v += l[i][k] * l[j][k];
                }
                out[(i, j)] = v;
            }
        }
    }
    fn dcov(&self, _t: f64, x: &[f64], out: &mut Tensor3) {
        let l = self.l(x);
        for de in 0..self.d {
            for i in 0..self.d {
                for j in 0..self.d {
                    let mut v = 0.0;
                    for k in 0..self.d {
                        v += self.l1[de][i][k] * l[j][k] + l[i][k] * self.l1[de][j][k];
                    }
                    out[(de, i, j)] = v;
                }
            }
        }
    }
    fn dmu(&self, _t: f64, x: &[f64], out: &mut Matrix) {
        for al in 0..self.d {
            for ga in 0..self.d {
                let mut v = self.b[al][ga];
                for be in 0..self.d {
                    v += self.q[al][ga][be] * x[be];
                }
                out[(al, ga)] = v;
            }
        }
    }
    fn rate(&self, _t: f64, x: &[f64]) -> f64 {
        let mut v = self.r0;
        for i in 0..self.d {
            v += self.r1[i] * x[i];
            for j in 0..self.d {
                v += 0.5 * self.r2[i][j] * x[i] * x[j];
            }
        }
        v
    }
    fn drate(&self, _t: f64, x: &[f64], out: &mut [f64]) {
        for i in 0..self.d {
            out[i] = self.r1[i] + (0..self.d).map(|j| self.r2[i][j] * x[j]).sum::<f64>();
        }
    }
}

/// `h(x) = Σ c · Π x_i^{k_i}`.
#[derive(Debug, Clone, PartialEq)]
pub struct PolyPayoff {
    pub terms: Vec<(f64, Vec<u32>)>,
}

impl PolyPayoff {
    /// Random polynomial of total degree at most `degree` in `d` variables.
    pub fn random<R: Rng>(d: usize, degree: u32, rng: &mut R) -> Self {
        let mut terms = Vec::new();
        let mut powers = vec![0u32; d];
        loop {
            if powers.iter().sum::<u32>() <= degree {
                terms.push((rng.random_range(-1.0..1.0), powers.clone()));
            }
            let mut a = 0;
            loop {
                if a == d {
                    return PolyPayoff { terms };
                }
                powers[a] += 1;
                if powers[a] <= degree {
                    break;
                }
                powers[a] = 0;
                a += 1;
            }
        }
    }

    pub fn eval<T: Scalar>(&self, x: &[T]) -> T {
        let mut total = T::from_f64(0.0);
        for (c, pw) in &self.terms {
            let mut m = T::from_f64(*c);
            for (xi, &k) in x.iter().zip(pw) {
                for _ in 0..k {
                    m = m * *xi;
                }
            }
            total = total + m;
        }
        total
    }
}

impl Payoff for PolyPayoff {
    fn value(&self, x: &[f64]) -> f64 {
        self.eval(x)
    }
    fn smoothness(&self) -> Smoothness {
        Smoothness::Smooth
    }
}
