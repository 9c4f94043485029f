//! Oracle comparisons on random polynomial instances.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use unbiased_mc::model::{covariance, Model1D, ModelND};
use unbiased_mc::unbiased1d::{terminal_contribution, CorrectionState1D, Frozen1D, Unbiased1D, Variant};
use unbiased_mc::unbiasednd::{step_coeffs_nd, terminal_contribution_nd, CorrectionStateND, UnbiasedND};

use super::jet::Jet2;
use super::models::{Poly1D, PolyND, PolyPayoff};
use super::oracle::{expect_1d, step, terminal_expectation, NextValues, Operator, SegmentMap};
use super::quadrature::expect_normal;

/// Worst relative disagreements on one instance.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct OracleReport {
    pub states: f64,
    pub weights: f64,
    pub terminal: f64,
}

impl OracleReport {
    pub fn worst(&self) -> f64 {
        self.states.max(self.weights).max(self.terminal)
    }

    pub fn merge(self, o: OracleReport) -> OracleReport {
        OracleReport {
            states: self.states.max(o.states),
            weights: self.weights.max(o.weights),
            terminal: self.terminal.max(o.terminal),
        }
    }
}

/// Random sorted jump times in `(0, T)` and Gaussian increments for them and the terminal segment.
fn skeleton<R: Rng>(rng: &mut R, maturity: f64, p: usize, d: usize) -> (Vec<f64>, Vec<f64>, Vec<Vec<f64>>) {
    let mut jumps: Vec<f64> = (0..p).map(|_| rng.random_range(0.05..0.95) * maturity).collect();
    jumps.sort_by(f64::total_cmp);
    jumps.dedup();
    let mut times = vec![0.0];
    times.extend(&jumps);
    times.push(maturity);
    let incs = times
        .windows(2)
        .map(|w| {
            let sd = (w[1] - w[0]).sqrt();
            (0..d).map(|_| sd * rng.random_range(-2.0..2.0)).collect()
        })
        .collect();
    (jumps, times, incs)
}

fn op_from_1d(s: &CorrectionState1D) -> Operator {
    Operator {
        a: 1.0,
        a1: vec![s.a_s],
        a2: vec![vec![s.a_ss]],
    }
}

fn op_from_nd(s: &CorrectionStateND) -> Operator {
    let d = s.dim();
    Operator {
        a: s.a,
        a1: s.a1.clone(),
        a2: (0..d).map(|i| (0..d).map(|j| s.a2[(i, j)]).collect()).collect(),
    }
}

fn op_error(engine: &Operator, oracle: &Operator) -> f64 {
    let scale = oracle.scale().max(1e-300);
    let mut e = (engine.a - oracle.a).abs();
    for (x, y) in engine.a1.iter().zip(&oracle.a1) {
        e = e.max((x - y).abs());
    }
    for (rx, ry) in engine.a2.iter().zip(&oracle.a2) {
        for (x, y) in rx.iter().zip(ry) {
            e = e.max((x - y).abs());
        }
    }
    e / scale
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs().max(1e-12)
}

/// Gauss–Hermite nodes per axis for the terminal expectation.
const TERMINAL_NODES_1D: usize = 24;
const TERMINAL_NODES_ND: usize = 12;

/// 1D engine against the oracle on the random instance `seed`.
pub fn check_1d(seed: u64, variant: Variant) -> OracleReport {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let model = Poly1D::random(&mut rng);
    let payoff = PolyPayoff::random(1, 3, &mut rng);
    let s0 = rng.random_range(0.8..1.2);
    let maturity = rng.random_range(0.5..1.5);
    let lambda = rng.random_range(0.5..3.0);
    let p = (seed % 4) as usize;
    let (jumps, times, incs) = skeleton(&mut rng, maturity, p, 1);
    let dws: Vec<f64> = incs.iter().map(|w| w[0]).collect();
    let engine = Unbiased1D::new(&model, &payoff, s0, maturity, lambda)
        .expect("valid instance")
        .with_variant(variant);
    let rec = engine.evaluate_skeleton(&jumps, &dws).expect("admissible path");

    let mut report = OracleReport::default();
    let mut op = Operator::identity(1);
    let mut x = s0;
    for k in 0..jumps.len() {
        let (t, dt) = (times[k], times[k + 1] - times[k]);
        let fr = Frozen1D::at(&model, t, x).expect("positive volatility");
        let seg = SegmentMap::from_1d(&fr.coeffs(), x, dt, dws[k]);
        x = seg.map(dt, &[Jet2::constant(dws[k])])[0].v;
        let t1 = times[k + 1];
        let sig = model.sigma(t1, x);
        let next = NextValues {
            mu: vec![model.mu(t1, x)],
            cov: vec![vec![sig * sig]],
            rate: 0.0,
        };
        let (dk, next_op) = step(&op, &seg, &next, lambda);
        report.weights = report.weights.max((rec.weights[k] - dk).abs() / dk.abs().max(1.0));
        op = next_op;
        report.states = report.states.max(op_error(&op_from_1d(&rec.corrections[k + 1]), &op));
    }

    let t_p = times[jumps.len()];
    let dt = maturity - t_p;
    let fr = Frozen1D::at(&model, t_p, x).expect("positive volatility");
    let seg = SegmentMap::from_1d(&fr.coeffs(), x, dt, 0.0);
    let state = rec.corrections[jumps.len()];
    let engine_term = expect_1d(TERMINAL_NODES_1D, dt, |b| {
        terminal_contribution(&state, t_p, x, dt, b, &payoff, &model).expect("admissible terminal")
    });
    let oracle_term = terminal_expectation(&op, &seg, &payoff, TERMINAL_NODES_1D);
    report.terminal = rel(engine_term, oracle_term);
    report
}

/// ND engine against the oracle on the random instance `seed`, `d = 1 + seed % 3`.
pub fn check_nd(seed: u64) -> OracleReport {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed_0000);
    let d = 1 + (seed % 3) as usize;
    let model = PolyND::random(d, &mut rng);
    let payoff = PolyPayoff::random(d, 3, &mut rng);
    let x0: Vec<f64> = (0..d).map(|_| rng.random_range(-0.5..0.5)).collect();
    let maturity = rng.random_range(0.5..1.5);
    let lambda = rng.random_range(0.5..3.0);
    let p = ((seed / 3) % 4) as usize;
    let (jumps, times, incs) = skeleton(&mut rng, maturity, p, d);
    let engine = UnbiasedND::new(&model, &payoff, x0.clone(), maturity, lambda).expect("valid instance");
    let rec = engine.evaluate_skeleton(&jumps, &incs).expect("admissible path");

    let mut report = OracleReport::default();
    let mut op = Operator::identity(d);
    let mut x = x0;
    for k in 0..jumps.len() {
        let (t, dt) = (times[k], times[k + 1] - times[k]);
        let co = step_coeffs_nd(t, &x, &model).expect("positive definite");
        let seg = SegmentMap::from_nd(&co, dt, &incs[k]);
        let realized: Vec<Jet2> = incs[k].iter().map(|w| Jet2::constant(*w)).collect();
        x = seg.map(dt, &realized).iter().map(|j| j.v).collect();
        let t1 = times[k + 1];
        let mut mu = vec![0.0; d];
        model.mu(t1, &x, &mut mu);
        let c = covariance(&model, t1, &x);
        let next = NextValues {
            mu,
            cov: (0..d).map(|i| (0..d).map(|j| c[(i, j)]).collect()).collect(),
            rate: model.rate(t1, &x),
        };
        let (dk, next_op) = step(&op, &seg, &next, lambda);
        report.weights = report.weights.max((rec.weights[k] - dk).abs() / dk.abs().max(1.0));
        op = next_op;
        report.states = report.states.max(op_error(&op_from_nd(&rec.corrections[k + 1]), &op));
    }

    let t_p = times[jumps.len()];
    let dt = maturity - t_p;
    let co = step_coeffs_nd(t_p, &x, &model).expect("positive definite");
    let seg = SegmentMap::from_nd(&co, dt, &vec![0.0; d]);
    let state = rec.corrections[jumps.len()].clone();
    let engine_term = expect_normal(d, TERMINAL_NODES_ND, dt, |b| {
        terminal_contribution_nd(&state, t_p, &x, dt, b, &payoff, &model, 1.0).expect("admissible terminal")
    });
    let oracle_term = terminal_expectation(&op, &seg, &payoff, TERMINAL_NODES_ND);
    report.terminal = rel(engine_term, oracle_term);
    report
}

/// Worst reports over `n` instances: (1D derived, 1D condensed, ND).
pub fn oracle_sweep(n: u64) -> (OracleReport, OracleReport, OracleReport) {
    (0..n).fold(Default::default(), |(a, b, c), s| {
        (
            a.merge(check_1d(s, Variant::Derived)),
            b.merge(check_1d(s, Variant::Condensed)),
            c.merge(check_nd(s)),
        )
    })
}
