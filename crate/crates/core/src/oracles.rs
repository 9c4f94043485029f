//! Closed-form reference values.

use crate::error::{Error, Result};

/// Standard normal CDF.
pub fn norm_cdf(x: f64) -> f64 {
    0.5 * libm::erfc(-x / std::f64::consts::SQRT_2)
}

/// Black–Scholes European put with relative volatility `sigma0`.
///
/// At `t_years = 0` this is the intrinsic value `max(K - S0, 0)`.
pub fn black_scholes_put(s0: f64, strike: f64, r: f64, sigma0: f64, t_years: f64) -> Result<f64> {
    if !(s0 > 0.0) || !(strike > 0.0) || !(sigma0 > 0.0) {
        return Err(Error::Domain(format!(
            "Black–Scholes needs S0, K, sigma0 > 0 (got {s0}, {strike}, {sigma0})"
        )));
    }
    if !(t_years >= 0.0) {
        return Err(Error::Domain(format!("maturity must be non-negative, got {t_years}")));
    }
    if t_years == 0.0 {
        return Ok((strike - s0).max(0.0));
    }
    let vol = sigma0 * t_years.sqrt();
    let d1 = ((s0 / strike).ln() + (r + 0.5 * sigma0 * sigma0) * t_years) / vol;
    let d2 = d1 - vol;
    Ok(strike * (-r * t_years).exp() * norm_cdf(-d2) - s0 * norm_cdf(-d1))
}

/// `E[exp(-∫₀ᵀ (r0 + eps W_t) dt)] = exp(-r0 T + eps² T³ / 6)`.
pub fn gaussian_rate_bond_oracle(r0: f64, eps: f64, t_years: f64) -> f64 {
    (-r0 * t_years + eps * eps * t_years.powi(3) / 6.0).exp()
}
