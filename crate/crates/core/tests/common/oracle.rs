//! Brute-force operator oracle for the correction recursion.
//!
//! Along a fixed path, the accumulated operator `A + A^α ∂_α + ½ A^{αβ} ∂_α ∂_β`
//! at `X_k` is pushed to `X_{k+1}` by composing it, through second-order
//! jets, with the map that shifts the segment start: `y ↦ X_k + f(Δt, Z(y))`
//! where `Z(y)` solves `f(0, Z - ΔW) = y - X_k` and the Brownian increment
//! moves with it. The discount ratio `exp(-(g(Z) - g(ΔW)))` rides along
//! the same map. The weight is the operator applied to the Hermite
//! polynomial whose derivatives at the start are the Gaussian kernel
//! weights, and the hat coefficients are recomputed here from the
//! Feynman–Kac generator of `exp(-g(t, Z_t)) u(X + f(t, Z_t))`. Nothing
//! from the engine's recursion is reused; only the segment polynomials
//! `f`, `g` and model values are shared.

use unbiased_mc::unbiased1d::StepCoeffs1D;
use unbiased_mc::unbiasednd::StepCoeffsND;

use super::jet::Jet2;
use super::models::PolyPayoff;
use super::quadrature::normal_rule;

/// Polynomials `f` and `g` of one segment, with its realized increment.
#[derive(Debug, Clone, PartialEq)]
pub struct SegmentMap {
    pub x: Vec<f64>,
    pub dt: f64,
    pub dw: Vec<f64>,
    pub f10: Vec<f64>,
    /// `f01[α][a]`.
    pub f01: Vec<Vec<f64>>,
    /// `f02[α][a][b]`.
    pub f02: Vec<Vec<Vec<f64>>>,
    /// `f11[α][a]`.
    pub f11: Vec<Vec<f64>>,
    pub g10: f64,
    pub g11: Vec<f64>,
}

impl SegmentMap {
    pub fn from_nd(co: &StepCoeffsND, dt: f64, dw: &[f64]) -> Self {
        let d = co.dim();
        SegmentMap {
            x: co.x.clone(),
            dt,
            dw: dw.to_vec(),
            f10: co.f10.clone(),
            f01: (0..d).map(|i| (0..d).map(|a| co.f01[(i, a)]).collect()).collect(),
            f02: (0..d)
                .map(|i| (0..d).map(|a| (0..d).map(|b| co.f02[(i, a, b)]).collect()).collect())
                .collect(),
            f11: (0..d).map(|i| (0..d).map(|a| co.f11[(i, a)]).collect()).collect(),
            g10: co.g10,
            g11: co.g11.clone(),
        }
    }

    pub fn from_1d(c: &StepCoeffs1D, x: f64, dt: f64, dw: f64) -> Self {
        SegmentMap {
            x: vec![x],
            dt,
            dw: vec![dw],
            f10: vec![c.f10],
            f01: vec![vec![c.f01]],
            f02: vec![vec![vec![c.f02]]],
            f11: vec![vec![c.f11]],
            g10: 0.0,
            g11: vec![0.0],
        }
    }

    pub fn dim(&self) -> usize {
        self.x.len()
    }

    /// `X + f(t, Z)` on jets.
    pub fn map(&self, t: f64, z: &[Jet2]) -> Vec<Jet2> {
        let d = self.dim();
        (0..d)
            .map(|al| {
                let mut y = Jet2::constant(self.x[al] + self.f10[al] * t);
                for a in 0..d {
                    y = y + z[a] * (self.f01[al][a] + self.f11[al][a] * t);
                    for b in 0..d {
                        y = y + z[a] * z[b] * (0.5 * self.f02[al][a][b]);
                    }
                }
                y
            })
            .collect()
    }

    /// `g(t, Z)` on jets.
    pub fn g(&self, t: f64, z: &[Jet2]) -> Jet2 {
        let mut g = Jet2::constant(self.g10 * t);
        for a in 0..self.dim() {
            g = g + z[a] * (self.g11[a] * t);
        }
        g
    }

    /// Brownian shift `Z0(y)` solving `f(0, Z0) = y - X` to second order.
    pub fn start_shift(&self) -> Vec<Jet2> {
        let d = self.dim();
        let inv = invert(&self.f01);
        let delta: Vec<Jet2> = (0..d).map(|i| Jet2::variable(i, 0.0)).collect();
        let mut z = vec![Jet2::default(); d];
        for _ in 0..3 {
            let rhs: Vec<Jet2> = (0..d)
                .map(|al| {
                    let mut v = delta[al];
                    for a in 0..d {
                        for b in 0..d {
                            v = v - z[a] * z[b] * (0.5 * self.f02[al][a][b]);
                        }
                    }
                    v
                })
                .collect();
            z = (0..d)
                .map(|a| (0..d).fold(Jet2::default(), |acc, al| acc + rhs[al] * inv[a][al]))
                .collect();
        }
        z
    }

    /// Drift, covariance and rate of the hat generator at the realized
    /// `(Δt, ΔW)`: with `e = ∂_Z f`, drift `∂_t f + ½ Δ_Z f - e ∇_Z g`,
    /// covariance `e e^T`, rate `∂_t g + ½ Δ_Z g - ½ |∇_Z g|²`.
    pub fn hat(&self) -> (Vec<f64>, Vec<Vec<f64>>, f64) {
        let d = self.dim();
        let (t, w) = (self.dt, &self.dw);
        let e: Vec<Vec<f64>> = (0..d)
            .map(|al| {
                (0..d)
                    .map(|a| {
                        self.f01[al][a]
                            + self.f11[al][a] * t
                            + (0..d).map(|b| self.f02[al][a][b] * w[b]).sum::<f64>()
                    })
                    .collect()
            })
            .collect();
        let grad_g: Vec<f64> = self.g11.iter().map(|g| g * t).collect();
        let mu = (0..d)
            .map(|al| {
                let dt_f = self.f10[al] + (0..d).map(|a| self.f11[al][a] * w[a]).sum::<f64>();
                let lap = (0..d).map(|a| self.f02[al][a][a]).sum::<f64>();
                let shift = (0..d).map(|a| e[al][a] * grad_g[a]).sum::<f64>();
                dt_f + 0.5 * lap - shift
            })
            .collect();
        let cov = (0..d)
            .map(|i| (0..d).map(|j| (0..d).map(|a| e[i][a] * e[j][a]).sum()).collect())
            .collect();
        let dt_g = self.g10 + self.g11.iter().zip(w).map(|(g, x)| g * x).sum::<f64>();
        let r = dt_g - 0.5 * grad_g.iter().map(|g| g * g).sum::<f64>();
        (mu, cov, r)
    }
}

/// Second-order operator `A + A^α ∂_α + ½ A^{αβ} ∂_α ∂_β`.
#[derive(Debug, Clone, PartialEq)]
pub struct Operator {
    pub a: f64,
    pub a1: Vec<f64>,
    pub a2: Vec<Vec<f64>>,
}

impl Operator {
    pub fn identity(d: usize) -> Self {
        Operator {
            a: 1.0,
            a1: vec![0.0; d],
            a2: vec![vec![0.0; d]; d],
        }
    }

    pub fn apply(&self, j: &Jet2) -> f64 {
        let d = self.a1.len();
        let mut v = self.a * j.v;
        for i in 0..d {
            v += self.a1[i] * j.g[i];
            for k in 0..d {
                v += 0.5 * self.a2[i][k] * j.h[i][k];
            }
        }
        v
    }

    /// Largest coefficient magnitude.
    pub fn scale(&self) -> f64 {
        self.a1
            .iter()
            .chain(self.a2.iter().flatten())
            .fold(self.a.abs(), |m, v| m.max(v.abs()))
    }
}

/// Model values at the end of a segment.
#[derive(Debug, Clone, PartialEq)]
pub struct NextValues {
    pub mu: Vec<f64>,
    pub cov: Vec<Vec<f64>>,
    pub rate: f64,
}

/// Operator at the segment end equivalent, on this path, to `op` at its start.
pub fn push(op: &Operator, seg: &SegmentMap) -> Operator {
    let d = seg.dim();
    let zero: Vec<Jet2> = seg.start_shift();
    let z: Vec<Jet2> = zero.iter().zip(&seg.dw).map(|(z, w)| *z + *w).collect();
    let y = seg.map(seg.dt, &z);
    let realized: Vec<Jet2> = seg.dw.iter().map(|w| Jet2::constant(*w)).collect();
    let ratio = (seg.g(seg.dt, &realized) - seg.g(seg.dt, &z)).exp();
    let dy: Vec<Jet2> = y.iter().map(|v| v.centered()).collect();
    Operator {
        a: op.apply(&ratio),
        a1: (0..d).map(|al| op.apply(&(ratio * dy[al]))).collect(),
        a2: (0..d)
            .map(|al| (0..d).map(|be| op.apply(&(ratio * dy[al] * dy[be]))).collect())
            .collect(),
    }
}

/// The operator applied, at the segment start, to the Gaussian kernel of the segment.
pub fn weight(op: &Operator, seg: &SegmentMap) -> f64 {
    let d = seg.dim();
    let z0 = seg.start_shift();
    let (t, w) = (seg.dt, &seg.dw);
    let mut h = Jet2::constant(1.0);
    for a in 0..d {
        h = h + z0[a] * (w[a] / t);
        for b in 0..d {
            let w2 = w[a] * w[b] / (t * t) - if a == b { 1.0 / t } else { 0.0 };
            h = h + z0[a] * z0[b] * (0.5 * w2);
        }
    }
    op.apply(&h)
}

/// One Poisson time: push `op` across `seg` and add `d · ΔH / λ`.
pub fn step(op: &Operator, seg: &SegmentMap, next: &NextValues, lambda: f64) -> (f64, Operator) {
    let d = seg.dim();
    let dk = weight(op, seg);
    let (mu_hat, cov_hat, r_hat) = seg.hat();
    let mut out = push(op, seg);
    out.a -= dk * (next.rate - r_hat) / lambda;
    for al in 0..d {
        out.a1[al] += dk * (next.mu[al] - mu_hat[al]) / lambda;
        for be in 0..d {
            out.a2[al][be] += dk * (next.cov[al][be] - cov_hat[al][be]) / lambda;
        }
    }
    (dk, out)
}

/// `𝒜 [y ↦ E[exp(-g(Δt, Z)) h(X + f(Δt, Z))]]` at the segment start, with
/// `Z = Z0(y) + B`, by an `n`-node tensor Gauss–Hermite rule.
pub fn terminal_expectation(op: &Operator, seg: &SegmentMap, payoff: &PolyPayoff, n: usize) -> f64 {
    let d = seg.dim();
    let z0 = seg.start_shift();
    super::quadrature::expect_normal(d, n, seg.dt, |b| {
        let z: Vec<Jet2> = (0..d).map(|a| z0[a] + b[a]).collect();
        let y = seg.map(seg.dt, &z);
        let disc = (-seg.g(seg.dt, &z)).exp();
        op.apply(&(disc * payoff.eval(&y)))
    })
}

/// `E[F(B)]` for `B ~ N(0, variance)` in one dimension.
pub fn expect_1d<F: FnMut(f64) -> f64>(n: usize, variance: f64, mut f: F) -> f64 {
    normal_rule(n, variance).iter().map(|(x, w)| w * f(*x)).sum()
}

/// Gauss–Jordan inverse of a small dense matrix.
pub fn invert(m: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let n = m.len();
    let mut a: Vec<Vec<f64>> = m.to_vec();
    let mut inv: Vec<Vec<f64>> = (0..n).map(|i| (0..n).map(|j| (i == j) as u8 as f64).collect()).collect();
    for c in 0..n {
        let piv = (c..n).max_by(|&i, &j| a[i][c].abs().total_cmp(&a[j][c].abs())).unwrap();
        a.swap(c, piv);
        inv.swap(c, piv);
        let p = a[c][c];
        assert!(p != 0.0, "singular matrix");
        for j in 0..n {
            a[c][j] /= p;
            inv[c][j] /= p;
        }
        for i in 0..n {
            if i != c {
                let f = a[i][c];
                for j in 0..n {
                    a[i][j] -= f * a[c][j];
                    inv[i][j] -= f * inv[c][j];
                }
            }
        }
    }
    inv
}
