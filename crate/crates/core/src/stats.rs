//! Streaming moment accumulation and the deterministic parallel path runner.

use std::time::Instant;

use rayon::prelude::*;

use crate::error::Result;

/// Two-sided 99% normal quantile.
pub const Z99: f64 = 2.576;

/// Paths per work unit. Chunk boundaries depend only on the path count, so
/// the merge order (and hence every output bit) is independent of threads.
pub const CHUNK: u64 = 8192;

/// Running count, mean and central moments up to order four.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct Accumulator {
    n: u64,
    mean: f64,
    m2: f64,
    m3: f64,
    m4: f64,
}

impl Accumulator {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, x: f64) {
        let n1 = self.n as f64;
        self.n += 1;
        let n = self.n as f64;
        let delta = x - self.mean;
        let dn = delta / n;
        let dn2 = dn * dn;
        let term1 = delta * dn * n1;
        self.mean += dn;
        self.m4 += term1 * dn2 * (n * n - 3.0 * n + 3.0) + 6.0 * dn2 * self.m2 - 4.0 * dn * self.m3;
        self.m3 += term1 * dn * (n - 2.0) - 3.0 * dn * self.m2;
        self.m2 += term1;
    }

    /// Pairwise combination of two disjoint samples.
    pub fn merge(&mut self, other: &Accumulator) {
        if other.n == 0 {
            return;
        }
        if self.n == 0 {
            *self = *other;
            return;
        }
        let na = self.n as f64;
        let nb = other.n as f64;
        let n = na + nb;
        let delta = other.mean - self.mean;
        let d2 = delta * delta;
        let d3 = d2 * delta;
        let d4 = d2 * d2;
        let m2 = self.m2 + other.m2 + d2 * na * nb / n;
        let m3 = self.m3
            + other.m3
            + d3 * na * nb * (na - nb) / (n * n)
            + 3.0 * delta * (na * other.m2 - nb * self.m2) / n;
        let m4 = self.m4
            + other.m4
            + d4 * na * nb * (na * na - na * nb + nb * nb) / (n * n * n)
            + 6.0 * d2 * (na * na * other.m2 + nb * nb * self.m2) / (n * n)
            + 4.0 * delta * (na * other.m3 - nb * self.m3) / n;
        self.mean += delta * nb / n;
        self.m2 = m2;
        self.m3 = m3;
        self.m4 = m4;
        self.n += other.n;
    }

    pub fn count(&self) -> u64 {
        self.n
    }

    pub fn mean(&self) -> f64 {
        self.mean
    }

    /// Unbiased sample variance; zero for fewer than two samples.
    pub fn variance(&self) -> f64 {
        if self.n < 2 {
            0.0
        } else {
            self.m2 / (self.n - 1) as f64
        }
    }

    pub fn stderr(&self) -> f64 {
        if self.n == 0 {
            0.0
        } else {
            (self.variance() / self.n as f64).sqrt()
        }
    }

    /// Moment kurtosis `n m4 / m2^2` (3 for a Gaussian); NaN when undefined.
    pub fn kurtosis(&self) -> f64 {
        if self.m2 == 0.0 {
            f64::NAN
        } else {
            self.n as f64 * self.m4 / (self.m2 * self.m2)
        }
    }
}

/// Per-run counters that do not enter the estimate.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct Diagnostics {
    /// Terminal segments whose length was floored.
    pub floored_segments: u64,
    /// Total Poisson jumps over all paths.
    pub jumps: u64,
}

impl Diagnostics {
    pub fn merge(&mut self, other: &Diagnostics) {
        self.floored_segments += other.floored_segments;
        self.jumps += other.jumps;
    }
}

/// Summary of one experiment cell.
#[derive(Debug, Clone, PartialEq)]
pub struct EstimatorResult {
    pub mean: f64,
    pub stderr: f64,
    pub n_paths: u64,
    pub seconds: f64,
    /// Empirical per-path variance.
    pub variance: f64,
    /// 99% confidence half-width, `Z99 * stderr`.
    pub ci99: f64,
    pub kurtosis: f64,
    pub diagnostics: Diagnostics,
}

impl EstimatorResult {
    pub fn from_accumulator(acc: &Accumulator, diagnostics: Diagnostics, seconds: f64) -> Self {
        let stderr = acc.stderr();
        EstimatorResult {
            mean: acc.mean(),
            stderr,
            n_paths: acc.count(),
            seconds,
            variance: acc.variance(),
            ci99: Z99 * stderr,
            kurtosis: acc.kurtosis(),
            diagnostics,
        }
    }

    /// Mean jumps per path.
    pub fn mean_jumps(&self) -> f64 {
        if self.n_paths == 0 {
            0.0
        } else {
            self.diagnostics.jumps as f64 / self.n_paths as f64
        }
    }

    /// `(mean - target) / stderr`.
    pub fn z_score(&self, target: f64) -> f64 {
        (self.mean - target) / self.stderr
    }
}

/// Two-sample z statistic for independent estimates.
pub fn z_between(a: &EstimatorResult, b: &EstimatorResult) -> f64 {
    (a.mean - b.mean) / (a.stderr * a.stderr + b.stderr * b.stderr).sqrt()
}

/// Evaluates `path(index, diag)` for every index in `start..end` and merges
/// the contributions chunk by chunk in index order.
///
/// The first failing path (lowest chunk, then lowest index) aborts the run.
pub fn accumulate_range<F>(start: u64, end: u64, path: F) -> Result<(Accumulator, Diagnostics)>
where
    F: Fn(u64, &mut Diagnostics) -> Result<f64> + Sync,
{
    let n_chunks = (end.saturating_sub(start)).div_ceil(CHUNK);
    let partials: Vec<Result<(Accumulator, Diagnostics)>> = (0..n_chunks)
        .into_par_iter()
        .map(|c| {
            let lo = start + c * CHUNK;
            let hi = (lo + CHUNK).min(end);
            let mut acc = Accumulator::new();
            let mut diag = Diagnostics::default();
            for i in lo..hi {
                acc.push(path(i, &mut diag)?);
            }
            Ok((acc, diag))
        })
        .collect();
    let mut acc = Accumulator::new();
    let mut diag = Diagnostics::default();
    for p in partials {
        let (a, d) = p?;
        acc.merge(&a);
        diag.merge(&d);
    }
    Ok((acc, diag))
}

/// Runs `n_paths` paths and times the whole cell.
pub fn run_paths<F>(n_paths: u64, path: F) -> Result<EstimatorResult>
where
    F: Fn(u64, &mut Diagnostics) -> Result<f64> + Sync,
{
    let started = Instant::now();
    let (acc, diag) = accumulate_range(0, n_paths, path)?;
    Ok(EstimatorResult::from_accumulator(
        &acc,
        diag,
        started.elapsed().as_secs_f64(),
    ))
}

/// Running estimate after `n_paths` paths.
#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub n_paths: u64,
    pub mean: f64,
    pub stderr: f64,
    pub ci99: f64,
}

/// Single pass over `0..checkpoints.last()`, snapshotting at each checkpoint.
///
/// Checkpoints must be strictly increasing.
pub fn run_checkpoints<F>(checkpoints: &[u64], path: F) -> Result<Vec<Checkpoint>>
where
    F: Fn(u64, &mut Diagnostics) -> Result<f64> + Sync,
{
    let mut out = Vec::with_capacity(checkpoints.len());
    let mut acc = Accumulator::new();
    let mut prev = 0;
    for &cp in checkpoints {
        debug_assert!(cp > prev || (cp == 0 && out.is_empty()));
        let (a, _) = accumulate_range(prev, cp, &path)?;
        acc.merge(&a);
        prev = cp;
        out.push(Checkpoint {
            n_paths: acc.count(),
            mean: acc.mean(),
            stderr: acc.stderr(),
            ci99: Z99 * acc.stderr(),
        });
    }
    Ok(out)
}

/// Weighted least-squares line through `(x, y, stderr)` points, weights `1/stderr²`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LineFit {
    pub slope: f64,
    pub intercept: f64,
    /// Standard error of the slope implied by the point stderrs.
    pub slope_stderr: f64,
}

/// Fits `y = intercept + slope · x`. Needs two distinct `x` and positive stderrs.
pub fn weighted_line_fit(points: &[(f64, f64, f64)]) -> Option<LineFit> {
    let (mut sw, mut sx, mut sy, mut sxx, mut sxy) = (0.0, 0.0, 0.0, 0.0, 0.0);
    for &(x, y, e) in points {
        if !(e > 0.0) {
            return None;
        }
        let w = 1.0 / (e * e);
        sw += w;
        sx += w * x;
        sy += w * y;
        sxx += w * x * x;
        sxy += w * x * y;
    }
    let det = sw * sxx - sx * sx;
    if points.len() < 2 || !(det > 0.0) {
        return None;
    }
    let slope = (sw * sxy - sx * sy) / det;
    Some(LineFit {
        slope,
        intercept: (sy - slope * sx) / sw,
        slope_stderr: (sw / det).sqrt(),
    })
}
