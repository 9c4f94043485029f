//! One-dimensional Poisson-randomized unbiased scheme.
//!
//! Between consecutive Poisson times the state follows an exactly simulable
//! polynomial map of the Brownian increment. The mismatch between the true
//! generator and that of the polynomial process is applied at each jump
//! time, divided by the intensity, and carried forward as a second-order
//! differential operator `A_S ∂_S + ½ A_SS ∂_S²` acting on the future value.
//! On the last segment the operator becomes a Gaussian weight and the payoff
//! is sampled antithetically.

use crate::error::{Error, Result};
use crate::model::{discount_factor, Model1D};
use crate::payoff::Payoff;
use crate::rng::{poisson_times_into, standard_normal, StreamKey};
use crate::stats::{run_paths, Diagnostics, EstimatorResult};

/// Shortest terminal segment; shorter ones are floored and counted.
pub const MIN_TERMINAL_DT: f64 = 1e-12;

/// Which form of the operator recursion to run.
///
/// `Derived` carries `A_SS` as the coefficient of `½ ∂_S²`. `Condensed`
/// moves the half from the weight and the cross term onto the
/// residual-variance term, so its `A_SS` is exactly half the derived one and
/// both produce the same contributions.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Variant {
    #[default]
    Derived,
    Condensed,
}

impl Variant {
    pub fn parse(s: &str) -> Option<Variant> {
        match s {
            "derived" => Some(Variant::Derived),
            "condensed" => Some(Variant::Condensed),
            _ => None,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Variant::Derived => "derived",
            Variant::Condensed => "condensed",
        }
    }

    /// Multiplier on the terms that differ between the two forms.
    fn half(self) -> f64 {
        match self {
            Variant::Derived => 0.5,
            Variant::Condensed => 1.0,
        }
    }
}

/// Polynomial coefficients of the segment map
/// `f(Δt, ΔW) = f01 ΔW + f10 Δt + ½ f02 ΔW² + f11 Δt ΔW`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepCoeffs1D {
    pub f01: f64,
    pub f02: f64,
    pub f10: f64,
    pub f11: f64,
}

impl StepCoeffs1D {
    #[inline]
    pub fn increment(&self, dt: f64, dw: f64) -> f64 {
        self.f01 * dw + self.f10 * dt + 0.5 * self.f02 * dw * dw + self.f11 * dt * dw
    }
}

/// Model values frozen at a segment start `(t_k, S_k)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Frozen1D {
    pub t: f64,
    pub s: f64,
    pub mu: f64,
    pub sigma: f64,
    pub dmu: f64,
    pub dsigma: f64,
}

impl Frozen1D {
    /// Evaluates the model; fails if `σ ≤ 0` or the state is outside the domain.
    pub fn at(model: &dyn Model1D, t: f64, s: f64) -> Result<Self> {
        let (lo, hi) = model.domain();
        if !s.is_finite() || s < lo || s > hi {
            return Err(Error::DomainExcursion {
                t,
                state: vec![s],
                path: 0,
            });
        }
        let sigma = model.sigma(t, s);
        if !(sigma > 0.0) {
            return Err(Error::NonPositiveVol {
                t,
                spot: s,
                sigma,
                path: 0,
            });
        }
        Ok(Frozen1D {
            t,
            s,
            mu: model.mu(t, s),
            sigma,
            dmu: model.dmu_ds(t, s),
            dsigma: model.dsigma_ds(t, s),
        })
    }

    pub fn coeffs(&self) -> StepCoeffs1D {
        let ssp = self.sigma * self.dsigma;
        StepCoeffs1D {
            f01: self.sigma,
            f02: ssp,
            f10: self.mu - 0.5 * ssp,
            f11: self.sigma * self.dmu,
        }
    }

    #[inline]
    fn increment(&self, dt: f64, dw: f64) -> f64 {
        self.mu * dt
            + self.sigma * dw
            + 0.5 * self.sigma * self.dsigma * (dw * dw - dt)
            + self.sigma * self.dmu * dt * dw
    }

    /// `b = ∂σ ΔW + ∂μ Δt`: relative change of the frame across the segment.
    #[inline]
    pub fn b(&self, dt: f64, dw: f64) -> f64 {
        self.dsigma * dw + self.dmu * dt
    }

    /// Residuals `(Δμ, ΔC)` at the end of this segment, given the model values there.
    #[inline]
    pub fn residuals(&self, dt: f64, dw: f64, next: &Frozen1D) -> (f64, f64) {
        let c = self.coeffs();
        let mu_hat = self.mu + c.f11 * dw;
        // `σ'² - σ² (1 + b)²` written as `(σ'² - σ²) - δe (σ + δe) - σ δe`
        // with `σ (1 + b) = σ + δe`; no cancellation between large terms.
        let de = c.f11 * dt + c.f02 * dw;
        let e = c.f01 + c.f11 * dt + c.f02 * dw;
        let shift = de * e + c.f01 * de;
        (next.mu - mu_hat, (next.sigma * next.sigma - self.sigma * self.sigma) - shift)
    }
}

/// Segment coefficients at `(t_k, S_k)`.
pub fn step_coeffs(t_k: f64, s_k: f64, model: &dyn Model1D) -> Result<StepCoeffs1D> {
    Frozen1D::at(model, t_k, s_k).map(|f| f.coeffs())
}

/// `ΔS = f(Δt, ΔW)`.
pub fn apply_f(coeffs: &StepCoeffs1D, dt: f64, dw: f64) -> f64 {
    coeffs.increment(dt, dw)
}

/// The segment preceding a Poisson time.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Segment1D {
    pub t: f64,
    pub s: f64,
    pub dt: f64,
    pub dw: f64,
}

/// Residuals `(Δμ_k, ΔC_k)` between the model at `(t_k, S_k)` and the
/// polynomial process of the previous segment.
pub fn delta_terms(t_k: f64, s_k: f64, prev: &Segment1D, model: &dyn Model1D) -> Result<(f64, f64)> {
    let p = Frozen1D::at(model, prev.t, prev.s)?;
    let n = Frozen1D::at(model, t_k, s_k)?;
    Ok(p.residuals(prev.dt, prev.dw, &n))
}

/// Accumulated operator `A_S ∂_S + ½ A_SS ∂_S²`.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct CorrectionState1D {
    pub a_s: f64,
    pub a_ss: f64,
}

impl CorrectionState1D {
    pub fn is_zero(&self) -> bool {
        self.a_s == 0.0 && self.a_ss == 0.0
    }
}

/// Gaussian weight realizing the accumulated operator on one segment.
pub fn d_weight(state: &CorrectionState1D, sigma: f64, dsigma: f64, dt: f64, dw: f64) -> f64 {
    d_weight_variant(Variant::Derived, state, sigma, dsigma, dt, dw)
}

pub fn d_weight_variant(
    variant: Variant,
    state: &CorrectionState1D,
    sigma: f64,
    dsigma: f64,
    dt: f64,
    dw: f64,
) -> f64 {
    let h = variant.half();
    let w1 = dw / dt;
    let w2 = (dw * dw - dt) / (dt * dt);
    let s2 = sigma * sigma;
    1.0 + (state.a_s / sigma - h * state.a_ss * dsigma / s2) * w1 + h * (state.a_ss / s2) * w2
}

/// Carries the operator across one segment and adds the jump correction.
#[allow(clippy::too_many_arguments)]
pub fn update_correction(
    state: &CorrectionState1D,
    b_k: f64,
    d_k: f64,
    dmu_next: f64,
    dc_next: f64,
    lambda: f64,
    sigma: f64,
    dsigma: f64,
) -> CorrectionState1D {
    update_correction_variant(Variant::Derived, state, b_k, d_k, dmu_next, dc_next, lambda, sigma, dsigma)
}

#[allow(clippy::too_many_arguments)]
pub fn update_correction_variant(
    variant: Variant,
    state: &CorrectionState1D,
    b_k: f64,
    d_k: f64,
    dmu_next: f64,
    dc_next: f64,
    lambda: f64,
    sigma: f64,
    dsigma: f64,
) -> CorrectionState1D {
    let h = variant.half();
    let g = 1.0 + b_k;
    // The condensed form moves its half onto the residual-variance term.
    let c_factor = match variant {
        Variant::Derived => 1.0,
        Variant::Condensed => 0.5,
    };
    CorrectionState1D {
        a_s: g * state.a_s - h * b_k * (dsigma / sigma) * state.a_ss + d_k * dmu_next / lambda,
        a_ss: g * g * state.a_ss + c_factor * d_k * dc_next / lambda,
    }
}

fn terminal_from_frozen(
    variant: Variant,
    state: &CorrectionState1D,
    fr: &Frozen1D,
    dt: f64,
    dw: f64,
    payoff: &dyn Payoff,
) -> f64 {
    let s_plus = fr.s + fr.increment(dt, dw);
    let s_minus = fr.s + fr.increment(dt, -dw);
    let s_zero = fr.s + fr.mu * dt;
    let d_plus = d_weight_variant(variant, state, fr.sigma, fr.dsigma, dt, dw);
    let d_minus = d_weight_variant(variant, state, fr.sigma, fr.dsigma, dt, -dw);
    let mut p = 0.5 * d_plus * payoff.value(&[s_plus]) + 0.5 * d_minus * payoff.value(&[s_minus]);
    if state.a_ss != 0.0 {
        let w2 = (dw * dw - dt) / (dt * dt);
        p -= variant.half() * state.a_ss / (fr.sigma * fr.sigma) * w2 * payoff.value(&[s_zero]);
    }
    p
}

/// Undiscounted antithetic contribution of the last segment `[t_p, T]`.
#[allow(clippy::too_many_arguments)]
pub fn terminal_contribution(
    state: &CorrectionState1D,
    t_p: f64,
    s_p: f64,
    dt_p: f64,
    dw_p: f64,
    payoff: &dyn Payoff,
    model: &dyn Model1D,
) -> Result<f64> {
    let fr = Frozen1D::at(model, t_p, s_p)?;
    Ok(terminal_from_frozen(Variant::Derived, state, &fr, dt_p, dw_p, payoff))
}

/// Everything recorded along one path.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct PathRecord1D {
    /// `t_0 = 0, t_1, …, t_p, T`.
    pub times: Vec<f64>,
    /// `S_{t_0}, …, S_{t_p}`.
    pub states: Vec<f64>,
    /// `(Δt_k, ΔW_k)` for `k = 0..=p`; the last entry is the terminal segment.
    pub increments: Vec<(f64, f64)>,
    /// `d_k(Δt_k, ΔW_k)` for `k = 0..p`, then `d_p(Δt_p, ±ΔW_p)` last two.
    pub weights: Vec<f64>,
    /// Operator state at `t_0, …, t_p`.
    pub corrections: Vec<CorrectionState1D>,
    /// Undiscounted contribution `P_T`.
    pub contribution: f64,
    pub discount: f64,
    pub floored: bool,
}

impl PathRecord1D {
    pub fn p(&self) -> usize {
        self.states.len() - 1
    }

    pub fn discounted(&self) -> f64 {
        self.discount * self.contribution
    }
}

/// Summary of one simulated path.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PathOutcome {
    pub p: usize,
    pub contribution: f64,
    pub discount: f64,
    pub floored: bool,
}

impl PathOutcome {
    pub fn discounted(&self) -> f64 {
        self.discount * self.contribution
    }
}

/// A configured 1D pricer.
pub struct Unbiased1D<'a> {
    model: &'a dyn Model1D,
    payoff: &'a dyn Payoff,
    s0: f64,
    maturity: f64,
    lambda: f64,
    variant: Variant,
    discount: f64,
}

impl<'a> Unbiased1D<'a> {
    pub fn new(
        model: &'a dyn Model1D,
        payoff: &'a dyn Payoff,
        s0: f64,
        maturity: f64,
        lambda: f64,
    ) -> Result<Self> {
        if !(lambda > 0.0) {
            return Err(Error::Domain(format!("intensity must be positive, got {lambda}")));
        }
        if !(maturity > 0.0) {
            return Err(Error::Domain(format!("maturity must be positive, got {maturity}")));
        }
        Ok(Unbiased1D {
            model,
            payoff,
            s0,
            maturity,
            lambda,
            variant: Variant::Derived,
            discount: discount_factor(model, maturity),
        })
    }

    pub fn with_variant(mut self, variant: Variant) -> Self {
        self.variant = variant;
        self
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    pub fn maturity(&self) -> f64 {
        self.maturity
    }

    /// Runs the scheme over fixed jump times, drawing `ΔW_k` from `draw(k, Δt_k)`.
    fn walk<G>(&self, jumps: &[f64], mut draw: G, mut rec: Option<&mut PathRecord1D>) -> Result<PathOutcome>
    where
        G: FnMut(usize, f64) -> f64,
    {
        let v = self.variant;
        let mut fr = Frozen1D::at(self.model, 0.0, self.s0)?;
        let mut state = CorrectionState1D::default();
        if let Some(r) = rec.as_deref_mut() {
            r.times.push(0.0);
            r.states.push(self.s0);
            r.corrections.push(state);
        }
        for (k, &t_next) in jumps.iter().enumerate() {
            let dt = t_next - fr.t;
            let dw = draw(k, dt);
            let s_next = fr.s + fr.increment(dt, dw);
            let next = Frozen1D::at(self.model, t_next, s_next)?;
            let d = d_weight_variant(v, &state, fr.sigma, fr.dsigma, dt, dw);
            let (dmu, dc) = fr.residuals(dt, dw, &next);
            state = update_correction_variant(v, &state, fr.b(dt, dw), d, dmu, dc, self.lambda, fr.sigma, fr.dsigma);
            if let Some(r) = rec.as_deref_mut() {
                r.times.push(t_next);
                r.states.push(s_next);
                r.increments.push((dt, dw));
                r.weights.push(d);
                r.corrections.push(state);
            }
            fr = next;
        }
        let raw = self.maturity - fr.t;
        let floored = raw < MIN_TERMINAL_DT;
        let dt = raw.max(MIN_TERMINAL_DT);
        let dw = draw(jumps.len(), dt);
        let contribution = terminal_from_frozen(v, &state, &fr, dt, dw, self.payoff);
        if let Some(r) = rec {
            r.times.push(self.maturity);
            r.increments.push((dt, dw));
            r.weights.push(d_weight_variant(v, &state, fr.sigma, fr.dsigma, dt, dw));
            r.weights.push(d_weight_variant(v, &state, fr.sigma, fr.dsigma, dt, -dw));
            r.contribution = contribution;
            r.discount = self.discount;
            r.floored = floored;
        }
        Ok(PathOutcome {
            p: jumps.len(),
            contribution,
            discount: self.discount,
            floored,
        })
    }

    /// Simulates the path owned by `key`.
    pub fn simulate(&self, key: StreamKey) -> Result<PathOutcome> {
        let mut rng = key.stream();
        let mut jumps = Vec::new();
        poisson_times_into(0.0, self.maturity, self.lambda, &mut rng, &mut jumps);
        self.walk(&jumps, |_, dt| dt.sqrt() * standard_normal(&mut rng), None)
            .map_err(|e| e.on_path(key.path_index))
    }

    /// Full record of the path owned by `key`.
    pub fn trace(&self, key: StreamKey) -> Result<PathRecord1D> {
        let mut rng = key.stream();
        let mut jumps = Vec::new();
        poisson_times_into(0.0, self.maturity, self.lambda, &mut rng, &mut jumps);
        let mut rec = PathRecord1D::default();
        self.walk(&jumps, |_, dt| dt.sqrt() * standard_normal(&mut rng), Some(&mut rec))
            .map_err(|e| e.on_path(key.path_index))?;
        Ok(rec)
    }

    /// Evaluates a path with prescribed jump times and Brownian increments.
    ///
    /// `increments` holds `p + 1` values, the last for the terminal segment.
    pub fn evaluate_skeleton(&self, jumps: &[f64], increments: &[f64]) -> Result<PathRecord1D> {
        if increments.len() != jumps.len() + 1 {
            return Err(Error::Domain(format!(
                "{} jump times need {} increments, got {}",
                jumps.len(),
                jumps.len() + 1,
                increments.len()
            )));
        }
        if jumps.windows(2).any(|w| w[0] >= w[1]) || jumps.iter().any(|&t| t <= 0.0 || t >= self.maturity) {
            return Err(Error::Domain("jump times must increase strictly inside (0, T)".into()));
        }
        let mut rec = PathRecord1D::default();
        self.walk(jumps, |k, _| increments[k], Some(&mut rec))?;
        Ok(rec)
    }

    /// Discounted estimate over `n_paths` paths keyed by `seed`.
    pub fn run(&self, n_paths: u64, seed: u64) -> Result<EstimatorResult> {
        run_paths(n_paths, |i, diag: &mut Diagnostics| {
            let out = self.simulate(StreamKey::new(seed, i))?;
            diag.jumps += out.p as u64;
            diag.floored_segments += out.floored as u64;
            Ok(out.discounted())
        })
    }
}

/// Discounted unbiased estimate of `E[h(S_T)]` with the default recursion.
pub fn price(
    model: &dyn Model1D,
    payoff: &dyn Payoff,
    s0: f64,
    maturity: f64,
    lambda: f64,
    n_paths: u64,
    seed: u64,
) -> Result<EstimatorResult> {
    Unbiased1D::new(model, payoff, s0, maturity, lambda)?.run(n_paths, seed)
}
