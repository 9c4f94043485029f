//! Biased reference schemes on a uniform time grid.

use crate::error::{Error, Result};
use crate::model::{discount_factor, Model1D};
use crate::payoff::Payoff;
use crate::rng::{standard_normal, StreamKey};
use crate::stats::{run_paths, EstimatorResult};

/// Time-stepping rule.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Scheme {
    Euler,
    Milstein,
}

impl Scheme {
    pub fn parse(s: &str) -> Option<Scheme> {
        match s {
            "euler" => Some(Scheme::Euler),
            "milstein" => Some(Scheme::Milstein),
            _ => None,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Scheme::Euler => "euler",
            Scheme::Milstein => "milstein",
        }
    }

    #[inline]
    pub fn step(self, t: f64, s: f64, dt: f64, dw: f64, model: &dyn Model1D) -> f64 {
        match self {
            Scheme::Euler => euler_step(t, s, dt, dw, model),
            Scheme::Milstein => milstein_step(t, s, dt, dw, model),
        }
    }
}

/// Uniform grid of `n_steps` steps over `[t0, T]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridSpec {
    pub t0: f64,
    pub maturity: f64,
    pub n_steps: u32,
}

impl GridSpec {
    pub fn new(t0: f64, maturity: f64, n_steps: u32) -> Result<Self> {
        if n_steps == 0 {
            return Err(Error::Domain("a grid needs at least one step".into()));
        }
        if !(maturity > t0) {
            return Err(Error::Domain(format!("horizon {maturity} must exceed start {t0}")));
        }
        Ok(GridSpec {
            t0,
            maturity,
            n_steps,
        })
    }

    pub fn dt(&self) -> f64 {
        (self.maturity - self.t0) / self.n_steps as f64
    }

    pub fn time(&self, i: u32) -> f64 {
        self.t0 + i as f64 * self.dt()
    }
}

/// `S' = S + μ Δt + σ ΔW`.
#[inline]
pub fn euler_step(t: f64, s: f64, dt: f64, dw: f64, model: &dyn Model1D) -> f64 {
    s + model.mu(t, s) * dt + model.sigma(t, s) * dw
}

/// Euler plus `½ σ ∂σ (ΔW² - Δt)`.
#[inline]
pub fn milstein_step(t: f64, s: f64, dt: f64, dw: f64, model: &dyn Model1D) -> f64 {
    let sig = model.sigma(t, s);
    s + model.mu(t, s) * dt + sig * dw + 0.5 * sig * model.dsigma_ds(t, s) * (dw * dw - dt)
}

/// Terminal state on `grid` driven by `increments` (one per step).
pub fn simulate_grid(scheme: Scheme, grid: &GridSpec, s0: f64, increments: &[f64], model: &dyn Model1D) -> f64 {
    let dt = grid.dt();
    increments
        .iter()
        .enumerate()
        .fold(s0, |s, (i, &dw)| scheme.step(grid.time(i as u32), s, dt, dw, model))
}

/// Discounted grid estimate of `E[h(S_T)]`.
#[allow(clippy::too_many_arguments)]
pub fn price_baseline(
    scheme: Scheme,
    model: &dyn Model1D,
    payoff: &dyn Payoff,
    s0: f64,
    maturity: f64,
    n_steps: u32,
    n_paths: u64,
    seed: u64,
) -> Result<EstimatorResult> {
    let grid = GridSpec::new(0.0, maturity, n_steps)?;
    let dt = grid.dt();
    let sd = dt.sqrt();
    let disc = discount_factor(model, maturity);
    run_paths(n_paths, |i, _| {
        let mut rng = StreamKey::new(seed, i).stream();
        let mut s = s0;
        for k in 0..n_steps {
            s = scheme.step(grid.time(k), s, dt, sd * standard_normal(&mut rng), model);
        }
        Ok(disc * payoff.value(&[s]))
    })
}
