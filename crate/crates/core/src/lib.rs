//! Unbiased Monte Carlo estimators for diffusion functionals.
//!
//! Time discretization is replaced by a Poisson process of intensity `λ`:
//! between jump times the state follows an exactly simulable polynomial map
//! of the Brownian increment, and the generator mismatch is applied at the
//! jump times as a differential operator scaled by `1/λ`. The estimator has
//! no discretization bias; only statistical error remains.
//!
//! - [`unbiased1d`]: one-dimensional scheme with deterministic rate.
//! - [`unbiasednd`]: d-dimensional scheme with state-dependent rate.
//! - [`baseline`]: Euler and Milstein grid schemes for comparison.
//! - [`harness`]: TOML-configured sweeps with CSV output.

pub mod baseline;
pub mod error;
pub mod harness;
pub mod linalg;
pub mod model;
pub mod oracles;
pub mod payoff;
pub mod rng;
pub mod stats;
pub mod unbiased1d;
pub mod unbiasednd;

pub use error::{Error, Result};
pub use stats::EstimatorResult;

/// Book chapters, compiled so their snippets run as doctests.
#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/introduction.md")]
    mod introduction {}
    #[doc = include_str!("../../../book/src/skeleton.md")]
    mod skeleton {}
    #[doc = include_str!("../../../book/src/segment-map.md")]
    mod segment_map {}
    #[doc = include_str!("../../../book/src/corrections.md")]
    mod corrections {}
    #[doc = include_str!("../../../book/src/multidimensional.md")]
    mod multidimensional {}
    #[doc = include_str!("../../../book/src/baselines.md")]
    mod baselines {}
    #[doc = include_str!("../../../book/src/experiments.md")]
    mod experiments {}
}
