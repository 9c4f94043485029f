//! Reproducible per-path random streams.
//!
//! Every path owns a ChaCha8 generator keyed by `(master_seed, path_index)`:
//! the master seed fills the first eight key bytes (little endian, remaining
//! key bytes zero) and the path index selects the ChaCha stream. Distinct keys
//! therefore select distinct keystreams, and a path's draws never depend on
//! which worker thread simulates it.
//!
//! Draw order within a path is fixed: all Poisson inter-arrival uniforms
//! first, then one Gaussian vector per segment, the terminal segment last.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};

/// Generator type owned by a single path.
pub type PathStream = ChaCha8Rng;

/// Identifies the random stream of one path.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct StreamKey {
    pub master_seed: u64,
    pub path_index: u64,
}

impl StreamKey {
    pub fn new(master_seed: u64, path_index: u64) -> Self {
        StreamKey {
            master_seed,
            path_index,
        }
    }

    pub fn stream(&self) -> PathStream {
        let mut key = [0u8; 32];
        key[..8].copy_from_slice(&self.master_seed.to_le_bytes());
        let mut rng = ChaCha8Rng::from_seed(key);
        rng.set_stream(self.path_index);
        rng
    }
}

/// Mixes a master seed with a sweep-cell index into an independent seed
/// (SplitMix64 finalizer, a bijection on `u64`).
pub fn derive_seed(master_seed: u64, cell: u64) -> u64 {
    let mut z = master_seed ^ cell.wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Uniform draw on `(0, 1]`.
#[inline]
pub fn uniform_open0(rng: &mut PathStream) -> f64 {
    1.0 - rng.random::<f64>()
}

/// Standard normal draw.
#[inline]
pub fn standard_normal(rng: &mut PathStream) -> f64 {
    rng.sample(StandardNormal)
}

/// Inverse-CDF exponential sample `-ln(u) / lambda`.
pub fn draw_exponential(lambda: f64, u: f64) -> Result<f64> {
    if !(lambda > 0.0) {
        return Err(Error::Domain(format!("intensity must be positive, got {lambda}")));
    }
    if !(u > 0.0 && u <= 1.0) {
        return Err(Error::Domain(format!("uniform must lie in (0, 1], got {u}")));
    }
    Ok(-u.ln() / lambda)
}

/// Poisson jump times in `(t0, t_end)`, appended to `out` (cleared first).
///
/// Draws exponential gaps until the running time exceeds `t_end`; that last
/// draw is discarded. Requires `lambda > 0`.
pub fn poisson_times_into(t0: f64, t_end: f64, lambda: f64, rng: &mut PathStream, out: &mut Vec<f64>) {
    debug_assert!(lambda > 0.0 && t_end > t0);
    out.clear();
    let mut t = t0;
    loop {
        t += -uniform_open0(rng).ln() / lambda;
        if t >= t_end {
            break;
        }
        out.push(t);
    }
}

/// Allocating form of [`poisson_times_into`]. `times.len()` is the count `p`.
pub fn poisson_times(t0: f64, t_end: f64, lambda: f64, rng: &mut PathStream) -> Result<Vec<f64>> {
    if !(lambda > 0.0) {
        return Err(Error::Domain(format!("intensity must be positive, got {lambda}")));
    }
    if !(t_end > t0) {
        return Err(Error::Domain(format!("horizon {t_end} must exceed start {t0}")));
    }
    let mut out = Vec::new();
    poisson_times_into(t0, t_end, lambda, rng, &mut out);
    Ok(out)
}

/// Fills `out` with independent `N(0, variance)` samples.
#[inline]
pub fn fill_gaussian(variance: f64, rng: &mut PathStream, out: &mut [f64]) {
    let sd = variance.sqrt();
    for x in out.iter_mut() {
        *x = sd * standard_normal(rng);
    }
}

/// `d` independent `N(0, variance)` samples.
pub fn draw_gaussian_vector(d: usize, variance: f64, rng: &mut PathStream) -> Vec<f64> {
    let mut out = vec![0.0; d];
    fill_gaussian(variance, rng, &mut out);
    out
}
