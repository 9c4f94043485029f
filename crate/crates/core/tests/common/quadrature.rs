//! Gauss–Hermite rules for Gaussian expectations.

use std::f64::consts::PI;

/// Nodes and weights for `∫ e^{-x²} f(x) dx`, found by Newton iteration on
/// the orthonormal Hermite recurrence. Exact for polynomials of degree `2n - 1`.
pub fn gauss_hermite(n: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(n >= 1);
    let mut x = vec![0.0; n];
    let mut w = vec![0.0; n];
    let m = n.div_ceil(2);
    let pim4 = PI.powf(-0.25);
    let nf = n as f64;
    let mut z = 0.0;
    for i in 0..m {
        // Standard asymptotic starting guesses, largest root first.
        z = match i {
            0 => (2.0 * nf + 1.0).sqrt() - 1.85575 * (2.0 * nf + 1.0).powf(-1.0 / 6.0),
            1 => z - 1.14 * nf.powf(0.426) / z,
            2 => 1.86 * z - 0.86 * x[0],
            3 => 1.91 * z - 0.91 * x[1],
            _ => 2.0 * z - x[i - 2],
        };
        let mut pp = 0.0;
        for _ in 0..100 {
            let mut p1 = pim4;
            let mut p2 = 0.0;
            for j in 0..n {
                let p3 = p2;
                p2 = p1;
                let jf = j as f64;
                p1 = z * (2.0 / (jf + 1.0)).sqrt() * p2 - (jf / (jf + 1.0)).sqrt() * p3;
            }
            pp = (2.0 * nf).sqrt() * p2;
            let dz = p1 / pp;
            z -= dz;
            if dz.abs() <= 1e-15 * z.abs().max(1.0) {
                break;
            }
        }
        x[i] = z;
        x[n - 1 - i] = -z;
        w[i] = 2.0 / (pp * pp);
        w[n - 1 - i] = w[i];
    }
    (x, w)
}

/// Rule for `E[f(Z)]` with `Z ~ N(0, variance)`.
pub fn normal_rule(n: usize, variance: f64) -> Vec<(f64, f64)> {
    let (x, w) = gauss_hermite(n);
    let scale = (2.0 * variance).sqrt();
    x.iter().zip(&w).map(|(xi, wi)| (scale * xi, wi / PI.sqrt())).collect()
}

/// `E[f(B)]` for `B ~ N(0, variance · I_d)` on the tensor rule with `n` nodes per axis.
pub fn expect_normal<F: FnMut(&[f64]) -> f64>(d: usize, n: usize, variance: f64, mut f: F) -> f64 {
    let rule = normal_rule(n, variance);
    let mut idx = vec![0usize; d];
    let mut point = vec![0.0; d];
    let mut total = 0.0;
    loop {
        let mut weight = 1.0;
        for a in 0..d {
            point[a] = rule[idx[a]].0;
            weight *= rule[idx[a]].1;
        }
        total += weight * f(&point);
        let mut a = 0;
        loop {
            if a == d {
                return total;
            }
            idx[a] += 1;
            if idx[a] < n {
                break;
            }
            idx[a] = 0;
            a += 1;
        }
    }
}
