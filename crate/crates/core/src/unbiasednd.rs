//! Multidimensional Poisson-randomized scheme with a stochastic short rate.
//!
//! Each segment maps a d-dimensional Brownian increment to the state through
//! a quadratic polynomial `f` built from the Cholesky factor `σ` of the
//! covariance and its derivatives, and accumulates the discount
//! `exp(-g(Δt, ΔW))` with `g = g10 Δt + g11·ΔW Δt`. The generator mismatch
//! at each Poisson time is carried as an operator
//! `A + A^α ∂_α + ½ A^{αβ} ∂_α ∂_β`.
//!
//! Index conventions: Greek indices are state coordinates, Latin indices are
//! Brownian coordinates. `e^α_a` is the Jacobian of the segment map,
//! `e^a_α` its inverse at the segment start, and `c^α_ab = ∂_b e^α_a`.

use crate::error::{Error, Result};
use crate::linalg::{cholesky_into, invert_lower_into, Frame, LowerTriangular, Matrix, Tensor3};
use crate::model::ModelND;
use crate::payoff::Payoff;
use crate::rng::{fill_gaussian, poisson_times_into, StreamKey};
use crate::stats::{run_paths, Diagnostics, EstimatorResult};
use crate::unbiased1d::MIN_TERMINAL_DT;

/// How derivatives with respect to the segment start act on the discount.
///
/// `Frozen` differentiates the Gaussian kernel only, keeping the discount
/// anchored at the realized segment start, and moves the discount gradient
/// into the transported operator when integrating by parts. `Kernel` uses
/// the weights returned by [`weights_nd`], which also differentiate the
/// discount exponent, and transports the operator without that gradient.
/// The two agree whenever the rate gradient vanishes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum DiscountWeights {
    #[default]
    Frozen,
    Kernel,
}

impl DiscountWeights {
    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "frozen" => Some(DiscountWeights::Frozen),
            "kernel" => Some(DiscountWeights::Kernel),
            _ => None,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            DiscountWeights::Frozen => "frozen",
            DiscountWeights::Kernel => "kernel",
        }
    }
}

/// Polynomial coefficients of `f` and `g` frozen at `(t_k, X_k)`, together
/// with the model values needed later on the segment.
#[derive(Debug, Clone, PartialEq)]
pub struct StepCoeffsND {
    pub t: f64,
    pub x: Vec<f64>,
    /// `σ^α_a`, lower-triangular Cholesky factor of `C`.
    pub f01: Matrix,
    /// `e^a_α = (σ^{-1})^a_α`.
    pub e_inv: Matrix,
    /// `(f02)^α_ab`, symmetric in `(a, b)`; also the curvature `c^α_ab`.
    pub f02: Tensor3,
    pub f10: Vec<f64>,
    /// `(f11)^α_a = σ^γ_a ∂_γ μ^α`.
    pub f11: Matrix,
    pub g10: f64,
    /// `(g11)_a = σ^γ_a ∂_γ r`.
    pub g11: Vec<f64>,
    pub mu: Vec<f64>,
    pub cov: Matrix,
    /// `∂_γ μ^α` at `(α, γ)`.
    pub dmu: Matrix,
    /// `∂_δ C^{βγ}` at `(δ, β, γ)`, symmetrized in the last two indices.
    pub dcov: Tensor3,
}

impl StepCoeffsND {
    pub fn dim(&self) -> usize {
        self.f10.len()
    }

    /// `ΔX^α = σ^α_a ΔW^a + f10^α Δt + ½ f02^α_ab ΔW^a ΔW^b + f11^α_a Δt ΔW^a`.
    pub fn increment(&self, dt: f64, dw: &[f64], out: &mut [f64]) {
        let d = self.dim();
        for al in 0..d {
            let mut v = self.f10[al] * dt;
            for a in 0..d {
                v += (self.f01[(al, a)] + self.f11[(al, a)] * dt) * dw[a];
                let mut q = 0.0;
                for b in 0..d {
                    q += self.f02[(al, a, b)] * dw[b];
                }
                v += 0.5 * q * dw[a];
            }
            out[al] = v;
        }
    }

    /// `g = g10 Δt + (g11)_a ΔW^a Δt`.
    pub fn g(&self, dt: f64, dw: &[f64]) -> f64 {
        self.g10 * dt + dt * self.g11.iter().zip(dw).map(|(g, w)| g * w).sum::<f64>()
    }

    /// Jacobian `e^α_a(Δt, ΔW) = σ^α_a + c^α_ab ΔW^b + (f11)^α_a Δt`.
    pub fn frame_at(&self, dt: f64, dw: &[f64], out: &mut Matrix) {
        let d = self.dim();
        for al in 0..d {
            for a in 0..d {
                let mut v = self.f01[(al, a)] + self.f11[(al, a)] * dt;
                for b in 0..d {
                    v += self.f02[(al, a, b)] * dw[b];
                }
                out[(al, a)] = v;
            }
        }
    }

    /// Hat-process drift, covariance and rate at `(Δt, ΔW)` of this segment.
    pub fn hat_values(&self, dt: f64, dw: &[f64]) -> (Vec<f64>, Matrix, f64) {
        let d = self.dim();
        let mut e = Matrix::zeros(d);
        self.frame_at(dt, dw, &mut e);
        let mut mu = self.mu.clone();
        for al in 0..d {
            for a in 0..d {
                mu[al] += self.f11[(al, a)] * dw[a] - self.g11[a] * e[(al, a)] * dt;
            }
        }
        let cov = e.mul(&e.transpose());
        let gw: f64 = self.g11.iter().zip(dw).map(|(g, w)| g * w).sum();
        let gg: f64 = self.g11.iter().map(|g| g * g).sum();
        let r = self.g10 + gw - 0.5 * gg * dt * dt;
        (mu, cov, r)
    }

    /// `∂_β C^{αβ} - ½ C^{αγ} ∂_γ log det C`, which must equal `f02^α_bb`.
    pub fn trace_identity_rhs(&self) -> Vec<f64> {
        let d = self.dim();
        let dlog = self.dlogdet();
        (0..d)
            .map(|al| {
                let div: f64 = (0..d).map(|be| self.dcov[(be, al, be)]).sum();
                let corr: f64 = (0..d).map(|g| self.cov[(al, g)] * dlog[g]).sum();
                div - 0.5 * corr
            })
            .collect()
    }

    /// `∂_γ log det C = Tr(C^{-1} ∂_γ C)`.
    fn dlogdet(&self) -> Vec<f64> {
        let d = self.dim();
        // C^{-1} = e_inv^T e_inv.
        let cinv = self.e_inv.transpose().mul(&self.e_inv);
        (0..d)
            .map(|g| {
                let mut s = 0.0;
                for b in 0..d {
                    for c in 0..d {
                        s += cinv[(c, b)] * self.dcov[(g, b, c)];
                    }
                }
                s
            })
            .collect()
    }
}

/// Segment coefficients at `(t_k, X_k)`.
pub fn step_coeffs_nd(t: f64, x: &[f64], model: &dyn ModelND) -> Result<StepCoeffsND> {
    let d = model.dim();
    if x.len() != d {
        return Err(Error::Domain(format!("state has length {}, model dimension is {d}", x.len())));
    }
    if !x.iter().all(|v| v.is_finite()) || !model.in_domain(x) {
        return Err(Error::DomainExcursion {
            t,
            state: x.to_vec(),
            path: 0,
        });
    }
    let mut cov = Matrix::zeros(d);
    model.cov(t, x, &mut cov);
    cov.symmetrize();
    let mut sig = Matrix::zeros(d);
    cholesky_into(&cov, &mut sig).map_err(|e| match e {
        Error::NotPositiveDefinite { pivot, value, .. } => Error::NotPositiveDefinite {
            pivot,
            value,
            context: format!(" at t={t}, X={x:?}"),
        },
        other => other,
    })?;
    let mut e_inv = Matrix::zeros(d);
    invert_lower_into(&sig, &mut e_inv)?;

    let mut dcov = Tensor3::zeros(d);
    model.dcov(t, x, &mut dcov);
    for de in 0..d {
        for b in 0..d {
            for c in (b + 1)..d {
                let avg = 0.5 * (dcov[(de, b, c)] + dcov[(de, c, b)]);
                dcov[(de, b, c)] = avg;
                dcov[(de, c, b)] = avg;
            }
        }
    }
    let mut mu = vec![0.0; d];
    model.mu(t, x, &mut mu);
    let mut dmu = Matrix::zeros(d);
    model.dmu(t, x, &mut dmu);
    let r = model.rate(t, x);
    let mut dr = vec![0.0; d];
    model.drate(t, x, &mut dr);

    // C_a^{bc} = σ^α_a e^b_β e^c_γ ∂_α C^{βγ}, contracted one index at a time.
    let mut t1 = Tensor3::zeros(d);
    for al in 0..d {
        for b in 0..d {
            for g in 0..d {
                let mut s = 0.0;
                for be in 0..d {
                    s += e_inv[(b, be)] * dcov[(al, be, g)];
                }
                t1[(al, b, g)] = s;
            }
        }
    }
    let mut t2 = Tensor3::zeros(d);
    for al in 0..d {
        for b in 0..d {
            for c in 0..d {
                let mut s = 0.0;
                for g in 0..d {
                    s += e_inv[(c, g)] * t1[(al, b, g)];
                }
                t2[(al, b, c)] = s;
            }
        }
    }
    let mut ca = Tensor3::zeros(d);
    for a in 0..d {
        for b in 0..d {
            for c in 0..d {
                let mut s = 0.0;
                for al in 0..d {
                    s += sig[(al, a)] * t2[(al, b, c)];
                }
                ca[(a, b, c)] = s;
            }
        }
    }
    // f^a_bc = ½ (C_c^{ab} + C_b^{ca} - C_a^{bc}), then f02^α_bc = σ^α_a f^a_bc.
    let mut f02 = Tensor3::zeros(d);
    for al in 0..d {
        for b in 0..d {
            for c in 0..d {
                let mut s = 0.0;
                for a in 0..d {
                    s += sig[(al, a)] * 0.5 * (ca[(c, a, b)] + ca[(b, c, a)] - ca[(a, b, c)]);
                }
                f02[(al, b, c)] = s;
            }
        }
    }
    for al in 0..d {
        for b in 0..d {
            for c in (b + 1)..d {
                let avg = 0.5 * (f02[(al, b, c)] + f02[(al, c, b)]);
                f02[(al, b, c)] = avg;
                f02[(al, c, b)] = avg;
            }
        }
    }
    let mut f11 = Matrix::zeros(d);
    let mut g11 = vec![0.0; d];
    for a in 0..d {
        for al in 0..d {
            f11[(al, a)] = (0..d).map(|g| sig[(g, a)] * dmu[(al, g)]).sum();
        }
        g11[a] = (0..d).map(|g| sig[(g, a)] * dr[g]).sum();
    }
    let mut co = StepCoeffsND {
        t,
        x: x.to_vec(),
        f01: sig,
        e_inv,
        f02,
        f10: vec![0.0; d],
        f11,
        g10: r,
        g11,
        mu,
        cov,
        dmu,
        dcov,
    };
    // Log-det form of μ - ½ f02^α_bb.
    let dlog = co.dlogdet();
    for al in 0..d {
        let div: f64 = (0..d).map(|be| co.dcov[(be, al, be)]).sum();
        let corr: f64 = (0..d).map(|g| co.cov[(al, g)] * dlog[g]).sum();
        co.f10[al] = co.mu[al] - 0.5 * div + 0.25 * corr;
    }
    Ok(co)
}

/// `ΔX = f(Δt, ΔW)`.
pub fn apply_f_nd(coeffs: &StepCoeffsND, dt: f64, dw: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; coeffs.dim()];
    coeffs.increment(dt, dw, &mut out);
    out
}

/// `g(Δt, ΔW)`; the segment discount is `exp(-g)`.
pub fn apply_g(coeffs: &StepCoeffsND, dt: f64, dw: &[f64]) -> f64 {
    coeffs.g(dt, dw)
}

/// Frame data of one realized segment.
#[derive(Debug, Clone, PartialEq)]
pub struct SegmentFrame {
    /// `e(0,0) = σ` and its inverse.
    pub e0: Frame,
    /// `e(Δt_k, ΔW_k)`.
    pub e1: Matrix,
    /// Curvature `c^α_ab`.
    pub c: Tensor3,
    /// `b^α_γ` with `e(Δt, ΔW)^α_a e^a_γ = δ^α_γ + b^α_γ`.
    pub b: Matrix,
    /// Discount gradient `(g11)_a Δt`.
    pub gamma: Vec<f64>,
}

impl SegmentFrame {
    pub fn new(coeffs: &StepCoeffsND, dt: f64, dw: &[f64]) -> Self {
        let d = coeffs.dim();
        let mut e1 = Matrix::zeros(d);
        coeffs.frame_at(dt, dw, &mut e1);
        let mut b = Matrix::zeros(d);
        for al in 0..d {
            for g in 0..d {
                let mut s = coeffs.dmu[(al, g)] * dt;
                for a in 0..d {
                    let mut cw = 0.0;
                    for bb in 0..d {
                        cw += coeffs.f02[(al, a, bb)] * dw[bb];
                    }
                    s += coeffs.e_inv[(a, g)] * cw;
                }
                b[(al, g)] = s;
            }
        }
        SegmentFrame {
            e0: Frame {
                e: coeffs.f01.clone(),
                e_inv: coeffs.e_inv.clone(),
            },
            e1,
            c: coeffs.f02.clone(),
            b,
            gamma: coeffs.g11.iter().map(|g| g * dt).collect(),
        }
    }

    pub fn dim(&self) -> usize {
        self.gamma.len()
    }

    /// Largest entry of `|e(Δt,ΔW) e_inv - I - b|`.
    pub fn b_defect(&self) -> f64 {
        let d = self.dim();
        let mut m = self.e1.mul(&self.e0.e_inv);
        for i in 0..d {
            m[(i, i)] -= 1.0;
        }
        m.max_abs_diff(&self.b)
    }
}

/// Weights `Ŵ_a = ΔW^a/Δt + (g11)_a Δt` and `Ŵ_ab = Ŵ_a Ŵ_b - δ_ab/Δt`.
pub fn weights_nd(coeffs: &StepCoeffsND, dt: f64, dw: &[f64]) -> (Vec<f64>, Matrix) {
    let w: Vec<f64> = dw
        .iter()
        .zip(&coeffs.g11)
        .map(|(x, g)| x / dt + g * dt)
        .collect();
    (w.clone(), second_weights(&w, dt))
}

/// Pure Gaussian-kernel weights `ΔW^a/Δt` and `ΔW^a ΔW^b/Δt² - δ_ab/Δt`.
pub fn brownian_weights(dt: f64, dw: &[f64]) -> (Vec<f64>, Matrix) {
    let w: Vec<f64> = dw.iter().map(|x| x / dt).collect();
    (w.clone(), second_weights(&w, dt))
}

fn second_weights(w: &[f64], dt: f64) -> Matrix {
    let d = w.len();
    let mut m = Matrix::zeros(d);
    for a in 0..d {
        for b in 0..d {
            m[(a, b)] = w[a] * w[b] - if a == b { 1.0 / dt } else { 0.0 };
        }
    }
    m
}

/// Accumulated operator `A + A^α ∂_α + ½ A^{αβ} ∂_α ∂_β`.
#[derive(Debug, Clone, PartialEq)]
pub struct CorrectionStateND {
    pub a: f64,
    pub a1: Vec<f64>,
    pub a2: Matrix,
}

impl CorrectionStateND {
    /// The identity operator.
    pub fn identity(d: usize) -> Self {
        CorrectionStateND {
            a: 1.0,
            a1: vec![0.0; d],
            a2: Matrix::zeros(d),
        }
    }

    pub fn dim(&self) -> usize {
        self.a1.len()
    }

    pub fn is_identity(&self) -> bool {
        self.a == 1.0 && self.a1.iter().all(|&v| v == 0.0) && self.a2.as_slice().iter().all(|&v| v == 0.0)
    }
}

/// The operator written in Brownian coordinates at the segment start:
/// `B0 + B^c ∂_c + ½ B^{ab} ∂_a ∂_b`.
struct BrownianOperator {
    b0: f64,
    b1: Vec<f64>,
    b2: Matrix,
}

impl BrownianOperator {
    fn new(state: &CorrectionStateND, frame: &SegmentFrame) -> Self {
        let d = state.dim();
        let e = &frame.e0.e_inv;
        // B^{ab} = e^a_α e^b_β A^{αβ}.
        let b2 = e.mul(&state.a2).mul(&e.transpose());
        let mut b1 = vec![0.0; d];
        for c in 0..d {
            let mut s: f64 = (0..d).map(|al| state.a1[al] * e[(c, al)]).sum();
            for g in 0..d {
                let ecg = e[(c, g)];
                if ecg == 0.0 {
                    continue;
                }
                let mut q = 0.0;
                for a in 0..d {
                    for b in 0..d {
                        q += b2[(a, b)] * frame.c[(g, a, b)];
                    }
                }
                s -= 0.5 * ecg * q;
            }
            b1[c] = s;
        }
        BrownianOperator { b0: state.a, b1, b2 }
    }

    fn weight(&self, w1: &[f64], w2: &Matrix) -> f64 {
        let d = w1.len();
        let mut v = self.b0;
        for c in 0..d {
            v += self.b1[c] * w1[c];
        }
        for a in 0..d {
            for b in 0..d {
                v += 0.5 * self.b2[(a, b)] * w2[(a, b)];
            }
        }
        v
    }
}

/// `d = A + A^α e^a_α Ŵ_a + ½ A^{αβ} e^a_α e^b_β [Ŵ_ab - e^c_γ c^γ_ab Ŵ_c]`.
pub fn d_scalar(state: &CorrectionStateND, frame: &SegmentFrame, w1: &[f64], w2: &Matrix) -> f64 {
    BrownianOperator::new(state, frame).weight(w1, w2)
}

#[allow(clippy::too_many_arguments)]
fn update_with(
    op: &BrownianOperator,
    frame: &SegmentFrame,
    gamma: Option<&[f64]>,
    d_k: f64,
    dr: f64,
    dmu: &[f64],
    dc: &Matrix,
    lambda: f64,
) -> CorrectionStateND {
    let d = frame.dim();
    let e1 = &frame.e1;
    // Brownian first-order coefficient after integration by parts against the discount.
    let mut v1 = op.b1.clone();
    let mut a = op.b0;
    if let Some(gm) = gamma {
        for c in 0..d {
            a -= op.b1[c] * gm[c];
            for b in 0..d {
                a += 0.5 * op.b2[(c, b)] * gm[c] * gm[b];
                v1[c] -= op.b2[(c, b)] * gm[b];
            }
        }
    }
    a -= d_k * dr / lambda;
    let mut a1 = vec![0.0; d];
    for al in 0..d {
        let mut s: f64 = (0..d).map(|c| v1[c] * e1[(al, c)]).sum();
        let mut q = 0.0;
        for x in 0..d {
            for y in 0..d {
                q += op.b2[(x, y)] * frame.c[(al, x, y)];
            }
        }
        s += 0.5 * q + d_k * dmu[al] / lambda;
        a1[al] = s;
    }
    let mut a2 = e1.mul(&op.b2).mul(&e1.transpose());
    for al in 0..d {
        for be in 0..d {
            a2[(al, be)] += d_k * dc[(al, be)] / lambda;
        }
    }
    a2.symmetrize();
    CorrectionStateND { a, a1, a2 }
}

/// Carries the operator across one segment and adds the jump correction,
/// integrating by parts against the frozen discount (the default
/// [`DiscountWeights::Frozen`] convention).
#[allow(clippy::too_many_arguments)]
pub fn update_correction_nd(
    state: &CorrectionStateND,
    frame: &SegmentFrame,
    d_k: f64,
    dr: f64,
    dmu: &[f64],
    dc: &Matrix,
    lambda: f64,
) -> CorrectionStateND {
    let op = BrownianOperator::new(state, frame);
    update_with(&op, frame, Some(&frame.gamma), d_k, dr, dmu, dc, lambda)
}

/// The segment preceding a Poisson time.
#[derive(Debug, Clone, PartialEq)]
pub struct SegmentND {
    pub t: f64,
    pub x: Vec<f64>,
    pub dt: f64,
    pub dw: Vec<f64>,
}

/// Residuals `(Δr, Δμ, ΔC)` between the model at `(t_k, X_k)` and the hat
/// process of the previous segment.
pub fn delta_terms_nd(
    t_k: f64,
    x_k: &[f64],
    prev: &SegmentND,
    model: &dyn ModelND,
) -> Result<(f64, Vec<f64>, Matrix)> {
    let p = step_coeffs_nd(prev.t, &prev.x, model)?;
    let d = model.dim();
    let mut mu = vec![0.0; d];
    model.mu(t_k, x_k, &mut mu);
    let mut cov = Matrix::zeros(d);
    model.cov(t_k, x_k, &mut cov);
    cov.symmetrize();
    Ok(residuals(&p, prev.dt, &prev.dw, model.rate(t_k, x_k), &mu, &cov))
}

fn residuals(prev: &StepCoeffsND, dt: f64, dw: &[f64], r: f64, mu: &[f64], cov: &Matrix) -> (f64, Vec<f64>, Matrix) {
    let (mu_h, _, r_h) = prev.hat_values(dt, dw);
    let d = prev.dim();
    let dmu = (0..d).map(|a| mu[a] - mu_h[a]).collect();
    // `C - e e^T = (C - C_k) - (δe e^T + σ δe^T)` with `δe = e - σ`, so the
    // Cholesky round-off in `σ σ^T` never enters and constant models give zero.
    let mut e = Matrix::zeros(d);
    prev.frame_at(dt, dw, &mut e);
    let mut de = Matrix::zeros(d);
    for al in 0..d {
        for a in 0..d {
            let mut v = prev.f11[(al, a)] * dt;
            for b in 0..d {
                v += prev.f02[(al, a, b)] * dw[b];
            }
            de[(al, a)] = v;
        }
    }
    let mut dc = Matrix::zeros(d);
    for al in 0..d {
        for be in 0..d {
            let mut hat_shift = 0.0;
            for a in 0..d {
                hat_shift += de[(al, a)] * e[(be, a)] + prev.f01[(al, a)] * de[(be, a)];
            }
            dc[(al, be)] = (cov[(al, be)] - prev.cov[(al, be)]) - hat_shift;
        }
    }
    (r - r_h, dmu, dc)
}

/// Discount accumulated over completed segments.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DiscountAccumulator {
    pub value: f64,
}

impl Default for DiscountAccumulator {
    fn default() -> Self {
        DiscountAccumulator { value: 1.0 }
    }
}

impl DiscountAccumulator {
    pub fn step(&mut self, g: f64) {
        self.value *= (-g).exp();
    }
}

#[allow(clippy::too_many_arguments)]
fn terminal_from_coeffs(
    conv: DiscountWeights,
    state: &CorrectionStateND,
    co: &StepCoeffsND,
    dt: f64,
    dw: &[f64],
    payoff: &dyn Payoff,
    d_p: f64,
) -> (f64, f64, f64) {
    let d = co.dim();
    let frame = SegmentFrame::new(co, dt, dw);
    let op = BrownianOperator::new(state, &frame);
    let neg: Vec<f64> = dw.iter().map(|x| -x).collect();
    let weights = |w: &[f64]| match conv {
        DiscountWeights::Frozen => brownian_weights(dt, w),
        DiscountWeights::Kernel => weights_nd(co, dt, w),
    };
    let (w1p, w2p) = weights(dw);
    let (w1m, w2m) = weights(&neg);
    let d_plus = op.weight(&w1p, &w2p);
    let d_minus = op.weight(&w1m, &w2m);
    let mut xp = vec![0.0; d];
    let mut xm = vec![0.0; d];
    co.increment(dt, dw, &mut xp);
    co.increment(dt, &neg, &mut xm);
    for a in 0..d {
        xp[a] += co.x[a];
        xm[a] += co.x[a];
    }
    let disc_p = (-co.g(dt, dw)).exp();
    let disc_m = (-co.g(dt, &neg)).exp();
    let mut p = 0.5 * d_plus * disc_p * payoff.value(&xp) + 0.5 * d_minus * disc_m * payoff.value(&xm);
    let (_, w2) = brownian_weights(dt, dw);
    let mut d0 = 0.0;
    for a in 0..d {
        for b in 0..d {
            d0 += 0.5 * op.b2[(a, b)] * w2[(a, b)];
        }
    }
    if d0 != 0.0 {
        let x0: Vec<f64> = (0..d).map(|a| co.x[a] + co.mu[a] * dt).collect();
        p -= d0 * (-co.g10 * dt).exp() * payoff.value(&x0);
    }
    (d_p * p, d_plus, d_minus)
}

/// Discounted antithetic contribution of the last segment `[t_p, T]`.
#[allow(clippy::too_many_arguments)]
pub fn terminal_contribution_nd(
    state: &CorrectionStateND,
    t_p: f64,
    x_p: &[f64],
    dt_p: f64,
    dw_p: &[f64],
    payoff: &dyn Payoff,
    model: &dyn ModelND,
    d_p: f64,
) -> Result<f64> {
    let co = step_coeffs_nd(t_p, x_p, model)?;
    Ok(terminal_from_coeffs(DiscountWeights::Frozen, state, &co, dt_p, dw_p, payoff, d_p).0)
}

/// Everything recorded along one path.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct PathRecordND {
    /// `t_0 = 0, t_1, …, t_p, T`.
    pub times: Vec<f64>,
    /// `X_{t_0}, …, X_{t_p}`.
    pub states: Vec<Vec<f64>>,
    /// `(Δt_k, ΔW_k)` for `k = 0..=p`; the last entry is the terminal segment.
    pub increments: Vec<(f64, Vec<f64>)>,
    /// `d_k` for `k = 0..p`, then the terminal `d_p(±ΔW_p)`.
    pub weights: Vec<f64>,
    /// Operator state at `t_0, …, t_p`.
    pub corrections: Vec<CorrectionStateND>,
    /// `D_0, …, D_p`.
    pub discounts: Vec<f64>,
    /// Discounted contribution.
    pub contribution: f64,
    pub floored: bool,
    /// Largest frame or symmetry defect seen on the path.
    pub max_frame_defect: f64,
}

impl PathRecordND {
    pub fn p(&self) -> usize {
        self.states.len() - 1
    }
}

/// Summary of one simulated path.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PathOutcomeND {
    pub p: usize,
    /// Discounted contribution.
    pub contribution: f64,
    /// Accumulated stochastic discount `D_p`.
    pub discount: f64,
    pub floored: bool,
}

/// A configured d-dimensional pricer.
pub struct UnbiasedND<'a> {
    model: &'a dyn ModelND,
    payoff: &'a dyn Payoff,
    x0: Vec<f64>,
    maturity: f64,
    lambda: f64,
    weights: DiscountWeights,
}

impl<'a> UnbiasedND<'a> {
    pub fn new(
        model: &'a dyn ModelND,
        payoff: &'a dyn Payoff,
        x0: Vec<f64>,
        maturity: f64,
        lambda: f64,
    ) -> Result<Self> {
        if !(lambda > 0.0) {
            return Err(Error::Domain(format!("intensity must be positive, got {lambda}")));
        }
        if !(maturity > 0.0) {
            return Err(Error::Domain(format!("maturity must be positive, got {maturity}")));
        }
        if x0.len() != model.dim() || model.dim() == 0 {
            return Err(Error::Domain(format!(
                "initial state has length {}, model dimension is {}",
                x0.len(),
                model.dim()
            )));
        }
        Ok(UnbiasedND {
            model,
            payoff,
            x0,
            maturity,
            lambda,
            weights: DiscountWeights::Frozen,
        })
    }

    pub fn with_weights(mut self, weights: DiscountWeights) -> Self {
        self.weights = weights;
        self
    }

    fn walk<G>(&self, jumps: &[f64], mut draw: G, mut rec: Option<&mut PathRecordND>) -> Result<PathOutcomeND>
    where
        G: FnMut(usize, f64, &mut [f64]),
    {
        let d = self.model.dim();
        let mut co = step_coeffs_nd(0.0, &self.x0, self.model)?;
        let mut state = CorrectionStateND::identity(d);
        let mut disc = DiscountAccumulator::default();
        let mut dw = vec![0.0; d];
        let mut dx = vec![0.0; d];
        let mut mu = vec![0.0; d];
        if let Some(r) = rec.as_deref_mut() {
            r.times.push(0.0);
            r.states.push(self.x0.clone());
            r.corrections.push(state.clone());
            r.discounts.push(disc.value);
        }
        for (k, &t_next) in jumps.iter().enumerate() {
            let dt = t_next - co.t;
            draw(k, dt, &mut dw);
            co.increment(dt, &dw, &mut dx);
            let x_next: Vec<f64> = co.x.iter().zip(&dx).map(|(x, v)| x + v).collect();
            let next = step_coeffs_nd(t_next, &x_next, self.model)?;
            let frame = SegmentFrame::new(&co, dt, &dw);
            let op = BrownianOperator::new(&state, &frame);
            let (w1, w2) = match self.weights {
                DiscountWeights::Frozen => brownian_weights(dt, &dw),
                DiscountWeights::Kernel => weights_nd(&co, dt, &dw),
            };
            let d_k = op.weight(&w1, &w2);
            disc.step(co.g(dt, &dw));
            mu.copy_from_slice(&next.mu);
            let (dr, dmu, dc) = residuals(&co, dt, &dw, next.g10, &mu, &next.cov);
            let gamma = match self.weights {
                DiscountWeights::Frozen => Some(frame.gamma.as_slice()),
                DiscountWeights::Kernel => None,
            };
            state = update_with(&op, &frame, gamma, d_k, dr, &dmu, &dc, self.lambda);
            if let Some(r) = rec.as_deref_mut() {
                r.times.push(t_next);
                r.states.push(x_next);
                r.increments.push((dt, dw.clone()));
                r.weights.push(d_k);
                r.corrections.push(state.clone());
                r.discounts.push(disc.value);
                let defect = frame.b_defect().max(frame.e0.identity_defect());
                r.max_frame_defect = r.max_frame_defect.max(defect);
            }
            co = next;
        }
        let raw = self.maturity - co.t;
        let floored = raw < MIN_TERMINAL_DT;
        let dt = raw.max(MIN_TERMINAL_DT);
        draw(jumps.len(), dt, &mut dw);
        let (contribution, d_plus, d_minus) =
            terminal_from_coeffs(self.weights, &state, &co, dt, &dw, self.payoff, disc.value);
        if let Some(r) = rec {
            r.times.push(self.maturity);
            r.increments.push((dt, dw.clone()));
            r.weights.push(d_plus);
            r.weights.push(d_minus);
            r.contribution = contribution;
            r.floored = floored;
        }
        Ok(PathOutcomeND {
            p: jumps.len(),
            contribution,
            discount: disc.value,
            floored,
        })
    }

    /// Simulates the path owned by `key`.
    pub fn simulate(&self, key: StreamKey) -> Result<PathOutcomeND> {
        let mut rng = key.stream();
        let mut jumps = Vec::new();
        poisson_times_into(0.0, self.maturity, self.lambda, &mut rng, &mut jumps);
        self.walk(&jumps, |_, dt, out| fill_gaussian(dt, &mut rng, out), None)
            .map_err(|e| e.on_path(key.path_index))
    }

    /// Full record of the path owned by `key`.
    pub fn trace(&self, key: StreamKey) -> Result<PathRecordND> {
        let mut rng = key.stream();
        let mut jumps = Vec::new();
        poisson_times_into(0.0, self.maturity, self.lambda, &mut rng, &mut jumps);
        let mut rec = PathRecordND::default();
        self.walk(&jumps, |_, dt, out| fill_gaussian(dt, &mut rng, out), Some(&mut rec))
            .map_err(|e| e.on_path(key.path_index))?;
        Ok(rec)
    }

    /// Evaluates a path with prescribed jump times and Brownian increments
    /// (`p + 1` vectors, the last for the terminal segment).
    pub fn evaluate_skeleton(&self, jumps: &[f64], increments: &[Vec<f64>]) -> Result<PathRecordND> {
        if increments.len() != jumps.len() + 1 {
            return Err(Error::Domain(format!(
                "{} jump times need {} increments, got {}",
                jumps.len(),
                jumps.len() + 1,
                increments.len()
            )));
        }
        if increments.iter().any(|w| w.len() != self.model.dim()) {
            return Err(Error::Domain("increment dimension mismatch".into()));
        }
        if jumps.windows(2).any(|w| w[0] >= w[1]) || jumps.iter().any(|&t| t <= 0.0 || t >= self.maturity) {
            return Err(Error::Domain("jump times must increase strictly inside (0, T)".into()));
        }
        let mut rec = PathRecordND::default();
        self.walk(jumps, |k, _, out| out.copy_from_slice(&increments[k]), Some(&mut rec))?;
        Ok(rec)
    }

    pub fn run(&self, n_paths: u64, seed: u64) -> Result<EstimatorResult> {
        run_paths(n_paths, |i, diag: &mut Diagnostics| {
            let out = self.simulate(StreamKey::new(seed, i))?;
            diag.jumps += out.p as u64;
            diag.floored_segments += out.floored as u64;
            Ok(out.contribution)
        })
    }
}

/// Unbiased estimate of `E[exp(-∫r) h(X_T)]` with the default conventions.
pub fn price_nd(
    model: &dyn ModelND,
    payoff: &dyn Payoff,
    x0: &[f64],
    maturity: f64,
    lambda: f64,
    n_paths: u64,
    seed: u64,
) -> Result<EstimatorResult> {
    UnbiasedND::new(model, payoff, x0.to_vec(), maturity, lambda)?.run(n_paths, seed)
}

/// Frame of a Cholesky factor, exposed for invariant checks.
pub fn frame_of(coeffs: &StepCoeffsND) -> Result<Frame> {
    Frame::from_factor(&LowerTriangular::new(coeffs.f01.clone())?)
}
