//! Diffusion models, their derivatives, and built-in instances.
//!
//! A one-dimensional model is `dS = μ(t,S) dt + σ(t,S) dW` with a
//! deterministic short rate `r(t)`. A d-dimensional model is
//! `dX^α = μ^α dt + σ^α_a dW^a` with covariance `C = σσ^T` and a short rate
//! `r(t,X)` that may depend on the state. Derivatives are supplied by the
//! model; [`validate_derivatives_1d`] and [`validate_derivatives_nd`] compare
//! them with finite differences.
//!
//! Implementations must be pure functions of their arguments: engines call
//! them concurrently from many threads.

use crate::linalg::{Matrix, Tensor3};

/// One-dimensional diffusion with a deterministic rate.
pub trait Model1D: Send + Sync {
    fn mu(&self, t: f64, s: f64) -> f64;
    fn sigma(&self, t: f64, s: f64) -> f64;
    fn dmu_ds(&self, t: f64, s: f64) -> f64;
    fn dsigma_ds(&self, t: f64, s: f64) -> f64;
    fn rate(&self, t: f64) -> f64;

    /// `Some(r)` when the rate does not depend on time; enables the closed-form discount.
    fn constant_rate(&self) -> Option<f64> {
        None
    }

    /// Admissible state interval. Engines report states outside it.
    fn domain(&self) -> (f64, f64) {
        (f64::NEG_INFINITY, f64::INFINITY)
    }
}

/// d-dimensional diffusion with a state-dependent rate.
pub trait ModelND: Send + Sync {
    fn dim(&self) -> usize;
    /// Drift `μ^α`.
    fn mu(&self, t: f64, x: &[f64], out: &mut [f64]);
    /// Covariance `C^{αβ}`; must be symmetric positive definite.
    fn cov(&self, t: f64, x: &[f64], out: &mut Matrix);
    /// `out[(δ, β, γ)] = ∂_δ C^{βγ}`.
    fn dcov(&self, t: f64, x: &[f64], out: &mut Tensor3);
    /// `out[(α, γ)] = ∂_γ μ^α`.
    fn dmu(&self, t: f64, x: &[f64], out: &mut Matrix);
    fn rate(&self, t: f64, x: &[f64]) -> f64;
    /// `out[α] = ∂_α r`.
    fn drate(&self, t: f64, x: &[f64], out: &mut [f64]);

    /// Admissible box. Engines report states outside it.
    fn in_domain(&self, _x: &[f64]) -> bool {
        true
    }
}

/// Covariance with exact symmetry enforced on the returned matrix.
pub fn covariance(model: &dyn ModelND, t: f64, x: &[f64]) -> Matrix {
    let mut c = Matrix::zeros(model.dim());
    model.cov(t, x, &mut c);
    c.symmetrize();
    c
}

/// `μ = μ0 S`, `σ = σ0 S`, constant rate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BlackScholes {
    pub mu0: f64,
    pub sigma0: f64,
    pub r: f64,
}

impl Model1D for BlackScholes {
    fn mu(&self, _t: f64, s: f64) -> f64 {
        self.mu0 * s
    }
    fn sigma(&self, _t: f64, s: f64) -> f64 {
        self.sigma0 * s
    }
    fn dmu_ds(&self, _t: f64, _s: f64) -> f64 {
        self.mu0
    }
    fn dsigma_ds(&self, _t: f64, _s: f64) -> f64 {
        self.sigma0
    }
    fn rate(&self, _t: f64) -> f64 {
        self.r
    }
    fn constant_rate(&self) -> Option<f64> {
        Some(self.r)
    }
    fn domain(&self) -> (f64, f64) {
        (0.0, f64::INFINITY)
    }
}

/// Constant drift `m` and volatility `s`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConstantCoeff {
    pub m: f64,
    pub s: f64,
    pub r: f64,
}

impl Model1D for ConstantCoeff {
    fn mu(&self, _t: f64, _x: f64) -> f64 {
        self.m
    }
    fn sigma(&self, _t: f64, _x: f64) -> f64 {
        self.s
    }
    fn dmu_ds(&self, _t: f64, _x: f64) -> f64 {
        0.0
    }
    fn dsigma_ds(&self, _t: f64, _x: f64) -> f64 {
        0.0
    }
    fn rate(&self, _t: f64) -> f64 {
        self.r
    }
    fn constant_rate(&self) -> Option<f64> {
        Some(self.r)
    }
}

/// Constant elasticity of variance: `μ = μ0 S`, `σ = σ0 S^β`, `S > 0`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Cev {
    pub mu0: f64,
    pub sigma0: f64,
    pub beta: f64,
    pub r: f64,
}

impl Model1D for Cev {
    fn mu(&self, _t: f64, s: f64) -> f64 {
        self.mu0 * s
    }
    fn sigma(&self, _t: f64, s: f64) -> f64 {
        self.sigma0 * s.powf(self.beta)
    }
    fn dmu_ds(&self, _t: f64, _s: f64) -> f64 {
        self.mu0
    }
    fn dsigma_ds(&self, _t: f64, s: f64) -> f64 {
        self.sigma0 * self.beta * s.powf(self.beta - 1.0)
    }
    fn rate(&self, _t: f64) -> f64 {
        self.r
    }
    fn constant_rate(&self) -> Option<f64> {
        Some(self.r)
    }
    fn domain(&self) -> (f64, f64) {
        (0.0, f64::INFINITY)
    }
}

/// A one-dimensional model viewed as a `d = 1` model with `C = σ²`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Embed1D<M>(pub M);

impl<M: Model1D> ModelND for Embed1D<M> {
    fn dim(&self) -> usize {
        1
    }
    fn mu(&self, t: f64, x: &[f64], out: &mut [f64]) {
        out[0] = self.0.mu(t, x[0]);
    }
    fn cov(&self, t: f64, x: &[f64], out: &mut Matrix) {
        let s = self.0.sigma(t, x[0]);
        out[(0, 0)] = s * s;
    }
    fn dcov(&self, t: f64, x: &[f64], out: &mut Tensor3) {
        out[(0, 0, 0)] = 2.0 * self.0.sigma(t, x[0]) * self.0.dsigma_ds(t, x[0]);
    }
    fn dmu(&self, t: f64, x: &[f64], out: &mut Matrix) {
        out[(0, 0)] = self.0.dmu_ds(t, x[0]);
    }
    fn rate(&self, t: f64, _x: &[f64]) -> f64 {
        self.0.rate(t)
    }
    fn drate(&self, _t: f64, _x: &[f64], out: &mut [f64]) {
        out[0] = 0.0;
    }
    fn in_domain(&self, x: &[f64]) -> bool {
        let (lo, hi) = self.0.domain();
        x[0] >= lo && x[0] <= hi
    }
}

/// `dX = dW` with short rate `r0 + eps X`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GaussianRate1D {
    pub r0: f64,
    pub eps: f64,
}

impl ModelND for GaussianRate1D {
    fn dim(&self) -> usize {
        1
    }
    fn mu(&self, _t: f64, _x: &[f64], out: &mut [f64]) {
        out[0] = 0.0;
    }
    fn cov(&self, _t: f64, _x: &[f64], out: &mut Matrix) {
        out[(0, 0)] = 1.0;
    }
    fn dcov(&self, _t: f64, _x: &[f64], out: &mut Tensor3) {
        out[(0, 0, 0)] = 0.0;
    }
    fn dmu(&self, _t: f64, _x: &[f64], out: &mut Matrix) {
        out[(0, 0)] = 0.0;
    }
    fn rate(&self, _t: f64, x: &[f64]) -> f64 {
        self.r0 + self.eps * x[0]
    }
    fn drate(&self, _t: f64, _x: &[f64], out: &mut [f64]) {
        out[0] = self.eps;
    }
}

/// Correlated geometric Brownian motions: `μ^α = m_α X^α`,
/// `C^{αβ} = ρ_{αβ} s_α s_β X^α X^β` with `ρ_{αβ} = rho` off the diagonal.
#[derive(Debug, Clone, PartialEq)]
pub struct NdLognormal {
    pub mu: Vec<f64>,
    pub sigma: Vec<f64>,
    pub rho: f64,
    pub r: f64,
}

impl NdLognormal {
    fn corr(&self, a: usize, b: usize) -> f64 {
        if a == b {
            1.0
        } else {
            self.rho
        }
    }
}

impl ModelND for NdLognormal {
    fn dim(&self) -> usize {
        self.mu.len()
    }
    fn mu(&self, _t: f64, x: &[f64], out: &mut [f64]) {
        for (a, o) in out.iter_mut().enumerate() {
            *o = self.mu[a] * x[a];
        }
    }
    fn cov(&self, _t: f64, x: &[f64], out: &mut Matrix) {
        let d = self.dim();
        for a in 0..d {
            for b in 0..d {
                out[(a, b)] = self.corr(a, b) * self.sigma[a] * self.sigma[b] * x[a] * x[b];
            }
        }
    }
    fn dcov(&self, _t: f64, x: &[f64], out: &mut Tensor3) {
        let d = self.dim();
        out.fill(0.0);
        for a in 0..d {
            for b in 0..d {
                let k = self.corr(a, b) * self.sigma[a] * self.sigma[b];
                out[(a, a, b)] += k * x[b];
                out[(b, a, b)] += k * x[a];
            }
        }
    }
    fn dmu(&self, _t: f64, _x: &[f64], out: &mut Matrix) {
        out.fill(0.0);
        for a in 0..self.dim() {
            out[(a, a)] = self.mu[a];
        }
    }
    fn rate(&self, _t: f64, _x: &[f64]) -> f64 {
        self.r
    }
    fn drate(&self, _t: f64, _x: &[f64], out: &mut [f64]) {
        out.iter_mut().for_each(|o| *o = 0.0);
    }
    fn in_domain(&self, x: &[f64]) -> bool {
        x.iter().all(|&v| v > 0.0)
    }
}

/// Constant drift vector and covariance matrix, constant rate.
#[derive(Debug, Clone, PartialEq)]
pub struct ConstantCoeffND {
    pub mu: Vec<f64>,
    pub cov: Matrix,
    pub r: f64,
}

impl ModelND for ConstantCoeffND {
    fn dim(&self) -> usize {
        self.mu.len()
    }
    fn mu(&self, _t: f64, _x: &[f64], out: &mut [f64]) {
        out.copy_from_slice(&self.mu);
    }
    fn cov(&self, _t: f64, _x: &[f64], out: &mut Matrix) {
        out.clone_from(&self.cov);
    }
    fn dcov(&self, _t: f64, _x: &[f64], out: &mut Tensor3) {
        out.fill(0.0);
    }
    fn dmu(&self, _t: f64, _x: &[f64], out: &mut Matrix) {
        out.fill(0.0);
    }
    fn rate(&self, _t: f64, _x: &[f64]) -> f64 {
        self.r
    }
    fn drate(&self, _t: f64, _x: &[f64], out: &mut [f64]) {
        out.iter_mut().for_each(|o| *o = 0.0);
    }
}

/// `exp(-∫₀ᵀ r(t) dt)`: closed form for a constant rate, otherwise adaptive
/// Simpson quadrature to absolute tolerance 1e-12.
pub fn discount_factor(model: &dyn Model1D, maturity: f64) -> f64 {
    if let Some(r) = model.constant_rate() {
        return (-r * maturity).exp();
    }
    (-integrate(&|t| model.rate(t), 0.0, maturity, 1e-12)).exp()
}

/// Adaptive Simpson integration of `f` over `[a, b]`.
pub fn integrate(f: &dyn Fn(f64) -> f64, a: f64, b: f64, tol: f64) -> f64 {
    fn simpson(fa: f64, fm: f64, fb: f64, a: f64, b: f64) -> f64 {
        (b - a) / 6.0 * (fa + 4.0 * fm + fb)
    }
    #[allow(clippy::too_many_arguments)]
    fn recurse(f: &dyn Fn(f64) -> f64, a: f64, b: f64, fa: f64, fm: f64, fb: f64, whole: f64, tol: f64, depth: u32) -> f64 {
        let m = 0.5 * (a + b);
        let (lm, rm) = (0.5 * (a + m), 0.5 * (m + b));
        let (flm, frm) = (f(lm), f(rm));
        let left = simpson(fa, flm, fm, a, m);
        let right = simpson(fm, frm, fb, m, b);
        let delta = left + right - whole;
        if depth == 0 || delta.abs() <= 15.0 * tol {
            left + right + delta / 15.0
        } else {
            recurse(f, a, m, fa, flm, fm, left, 0.5 * tol, depth - 1)
                + recurse(f, m, b, fm, frm, fb, right, 0.5 * tol, depth - 1)
        }
    }
    if a == b {
        return 0.0;
    }
    let (fa, fb) = (f(a), f(b));
    let fm = f(0.5 * (a + b));
    let whole = simpson(fa, fm, fb, a, b);
    recurse(f, a, b, fa, fm, fb, whole, tol, 48)
}

/// Threshold above which a derivative mismatch is reported as a violation.
pub const DERIVATIVE_TOLERANCE: f64 = 1e-5;

/// Result of comparing supplied derivatives with central differences.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct DerivativeReport {
    pub max_rel_error: f64,
    /// Human-readable descriptions of mismatches above [`DERIVATIVE_TOLERANCE`].
    pub violations: Vec<String>,
}

impl DerivativeReport {
    pub fn is_ok(&self) -> bool {
        self.violations.is_empty()
    }

    fn record(&mut self, what: impl FnOnce() -> String, supplied: f64, fd: f64) {
        let denom = supplied.abs().max(fd.abs()).max(1e-8);
        let err = (supplied - fd).abs() / denom;
        if err > self.max_rel_error {
            self.max_rel_error = err;
        }
        if err > DERIVATIVE_TOLERANCE {
            self.violations
                .push(format!("{}: supplied {supplied:e}, finite difference {fd:e}", what()));
        }
    }
}

fn fd_step(x: f64) -> f64 {
    1e-4 * x.abs().max(1.0)
}

/// Checks `dmu_ds` and `dsigma_ds` at `(t, S)` probes.
pub fn validate_derivatives_1d(model: &dyn Model1D, probes: &[(f64, f64)]) -> DerivativeReport {
    let mut rep = DerivativeReport::default();
    for &(t, s) in probes {
        let h = fd_step(s);
        let fd_mu = (model.mu(t, s + h) - model.mu(t, s - h)) / (2.0 * h);
        let fd_sig = (model.sigma(t, s + h) - model.sigma(t, s - h)) / (2.0 * h);
        rep.record(|| format!("dmu_ds at t={t}, S={s}"), model.dmu_ds(t, s), fd_mu);
        rep.record(|| format!("dsigma_ds at t={t}, S={s}"), model.dsigma_ds(t, s), fd_sig);
    }
    rep
}

/// Checks `dmu`, `dcov` and `drate` at `(t, X)` probes.
pub fn validate_derivatives_nd(model: &dyn ModelND, probes: &[(f64, Vec<f64>)]) -> DerivativeReport {
    let d = model.dim();
    let mut rep = DerivativeReport::default();
    let (mut mu_p, mut mu_m) = (vec![0.0; d], vec![0.0; d]);
    let (mut c_p, mut c_m) = (Matrix::zeros(d), Matrix::zeros(d));
    let mut dmu = Matrix::zeros(d);
    let mut dc = Tensor3::zeros(d);
    let mut dr = vec![0.0; d];
    for (t, x) in probes {
        let t = *t;
        model.dmu(t, x, &mut dmu);
        model.dcov(t, x, &mut dc);
        model.drate(t, x, &mut dr);
        for g in 0..d {
            let h = fd_step(x[g]);
            let mut xp = x.clone();
            let mut xm = x.clone();
            xp[g] += h;
            xm[g] -= h;
            model.mu(t, &xp, &mut mu_p);
            model.mu(t, &xm, &mut mu_m);
            model.cov(t, &xp, &mut c_p);
            model.cov(t, &xm, &mut c_m);
            for a in 0..d {
                let fd = (mu_p[a] - mu_m[a]) / (2.0 * h);
                rep.record(|| format!("dmu[{a}][{g}] at t={t}, X={x:?}"), dmu[(a, g)], fd);
                for b in 0..d {
                    let fd = (c_p[(a, b)] - c_m[(a, b)]) / (2.0 * h);
                    rep.record(|| format!("dcov[{g}][{a}][{b}] at t={t}, X={x:?}"), dc[(g, a, b)], fd);
                }
            }
            let fd = (model.rate(t, &xp) - model.rate(t, &xm)) / (2.0 * h);
            rep.record(|| format!("drate[{g}] at t={t}, X={x:?}"), dr[g], fd);
        }
    }
    rep
}
