//! Experiment configuration, sweeps and CSV output.
//!
//! A configuration is a TOML document with `[experiment]`, `[model]` and
//! `[payoff]` tables; see the README for every key. Each sweep cell draws
//! from its own seed derived from the master seed and the cell index, so
//! cells are statistically independent and their order never matters.

use std::fmt::Write as _;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::Deserialize;

use crate::baseline::Scheme;
use crate::error::{Error, Result};
use crate::linalg::Matrix;
use crate::model::{
    BlackScholes, Cev, ConstantCoeff, ConstantCoeffND, Embed1D, GaussianRate1D, Model1D, ModelND, NdLognormal,
};
use crate::payoff::{BasketPut, Call, Constant, Linear, Payoff, Polynomial, Put};
use crate::rng::{derive_seed, StreamKey};
use crate::stats::{run_checkpoints, Diagnostics, EstimatorResult};
use crate::unbiased1d::{Unbiased1D, Variant};
use crate::unbiasednd::{DiscountWeights, UnbiasedND};

/// Exact header of the sweep CSV.
pub const SWEEP_HEADER: &str = "scheme,param,mean,stderr,ci99,variance,seconds";
/// Exact header of the convergence-trace CSV.
pub const TRACE_HEADER: &str = "scheme,param,n_paths,mean,stderr,ci99";
/// Exact header of the per-path diagnostics CSV.
pub const PATHS_HEADER: &str = "path_index,p,P_T,discount";

/// Environment variable holding the default worker-thread count.
pub const THREADS_ENV: &str = "UNBIASED_MC_THREADS";

/// Pricing engine selected by `scheme`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
pub enum SchemeKind {
    #[serde(rename = "euler")]
    Euler,
    #[serde(rename = "milstein")]
    Milstein,
    #[serde(rename = "unbiased-1d")]
    Unbiased1D,
    #[serde(rename = "unbiased-nd")]
    UnbiasedND,
}

impl SchemeKind {
    pub fn name(self) -> &'static str {
        match self {
            SchemeKind::Euler => "euler",
            SchemeKind::Milstein => "milstein",
            SchemeKind::Unbiased1D => "unbiased-1d",
            SchemeKind::UnbiasedND => "unbiased-nd",
        }
    }

    fn is_unbiased(self) -> bool {
        matches!(self, SchemeKind::Unbiased1D | SchemeKind::UnbiasedND)
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(untagged)]
enum OneOrMany<T> {
    One(T),
    Many(Vec<T>),
}

impl<T> OneOrMany<T> {
    fn into_vec(self) -> Vec<T> {
        match self {
            OneOrMany::One(x) => vec![x],
            OneOrMany::Many(v) => v,
        }
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawExperiment {
    scheme: SchemeKind,
    #[serde(rename = "T")]
    maturity: f64,
    lambda: Option<OneOrMany<f64>>,
    n_steps: Option<OneOrMany<u32>>,
    n_paths: u64,
    seed: u64,
    variant: Option<String>,
    weights: Option<String>,
    checkpoints: Option<Vec<u64>>,
    output: Option<PathBuf>,
    trace_output: Option<PathBuf>,
    diagnostics: Option<PathBuf>,
}

/// Model selected by `[model] name`, with its parameters.
#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(tag = "name", deny_unknown_fields)]
pub enum ModelConfig {
    #[serde(rename = "black-scholes")]
    BlackScholes { s0: f64, mu0: f64, sigma0: f64, r: f64 },
    #[serde(rename = "constant-coeff")]
    ConstantCoeff {
        s0: f64,
        m: f64,
        s: f64,
        #[serde(default)]
        r: f64,
    },
    #[serde(rename = "cev")]
    Cev {
        s0: f64,
        mu0: f64,
        sigma0: f64,
        beta: f64,
        #[serde(default)]
        r: f64,
    },
    #[serde(rename = "gaussian-rate-1d")]
    GaussianRate1D {
        #[serde(default)]
        x0: f64,
        r0: f64,
        eps: f64,
    },
    #[serde(rename = "nd-lognormal")]
    NdLognormal {
        x0: Vec<f64>,
        mu: Vec<f64>,
        sigma: Vec<f64>,
        rho: f64,
        #[serde(default)]
        r: f64,
    },
    #[serde(rename = "constant-coeff-nd")]
    ConstantCoeffND {
        x0: Vec<f64>,
        mu: Vec<f64>,
        cov: Vec<Vec<f64>>,
        #[serde(default)]
        r: f64,
    },
}

/// Payoff selected by `[payoff] kind`.
#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(tag = "kind", deny_unknown_fields)]
pub enum PayoffConfig {
    #[serde(rename = "put")]
    Put { strike: f64 },
    #[serde(rename = "call")]
    Call { strike: f64 },
    #[serde(rename = "constant")]
    Constant { value: f64 },
    #[serde(rename = "linear")]
    Linear {
        #[serde(default)]
        weights: Vec<f64>,
    },
    #[serde(rename = "polynomial")]
    Polynomial { coeffs: Vec<f64> },
    #[serde(rename = "basket-put")]
    BasketPut {
        strike: f64,
        #[serde(default)]
        weights: Vec<f64>,
    },
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    experiment: RawExperiment,
    model: ModelConfig,
    payoff: PayoffConfig,
}

/// Cell parameters of a sweep.
#[derive(Debug, Clone, PartialEq)]
pub enum Sweep {
    Lambda(Vec<f64>),
    Steps(Vec<u32>),
}

impl Sweep {
    pub fn len(&self) -> usize {
        match self {
            Sweep::Lambda(v) => v.len(),
            Sweep::Steps(v) => v.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    fn label(&self, i: usize) -> String {
        match self {
            Sweep::Lambda(v) => format!("{}", v[i]),
            Sweep::Steps(v) => format!("{}", v[i]),
        }
    }
}

/// A validated experiment description.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub scheme: SchemeKind,
    pub maturity: f64,
    pub sweep: Sweep,
    pub n_paths: u64,
    pub seed: u64,
    pub variant: Variant,
    pub weights: DiscountWeights,
    pub checkpoints: Vec<u64>,
    pub output: Option<PathBuf>,
    pub trace_output: Option<PathBuf>,
    pub diagnostics: Option<PathBuf>,
    pub model: ModelConfig,
    pub payoff: PayoffConfig,
}

impl ExperimentConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let raw: RawConfig = toml::from_str(text).map_err(|e| Error::Config {
            key: None,
            message: e.to_string().trim_end().to_string(),
        })?;
        Self::validate(raw)
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Io(format!("cannot read {}: {e}", path.display())))?;
        Self::from_toml_str(&text)
    }

    fn validate(raw: RawConfig) -> Result<Self> {
        let ex = raw.experiment;
        let sweep = match (ex.scheme.is_unbiased(), ex.lambda, ex.n_steps) {
            (true, Some(l), None) => Sweep::Lambda(l.into_vec()),
            (false, None, Some(n)) => Sweep::Steps(n.into_vec()),
            (true, _, Some(_)) => {
                return Err(Error::config("experiment.n_steps", "unbiased schemes take `lambda`, not `n_steps`"))
            }
            (false, Some(_), _) => {
                return Err(Error::config("experiment.lambda", "grid schemes take `n_steps`, not `lambda`"))
            }
            (true, None, None) => return Err(Error::config("experiment.lambda", "missing intensity list")),
            (false, None, None) => return Err(Error::config("experiment.n_steps", "missing step-count list")),
        };
        match &sweep {
            Sweep::Lambda(v) if v.iter().any(|&l| !(l > 0.0) || !l.is_finite()) => {
                return Err(Error::config("experiment.lambda", "intensities must be positive and finite"))
            }
            Sweep::Steps(v) if v.contains(&0) => {
                return Err(Error::config("experiment.n_steps", "step counts must be at least 1"))
            }
            _ => {}
        }
        if ex.n_paths == 0 {
            return Err(Error::config("experiment.n_paths", "must be at least 1"));
        }
        if !(ex.maturity > 0.0) || !ex.maturity.is_finite() {
            return Err(Error::config("experiment.T", "maturity must be positive"));
        }
        let variant = match ex.variant.as_deref() {
            None => Variant::Derived,
            Some(s) => Variant::parse(s)
                .ok_or_else(|| Error::config("experiment.variant", format!("unknown variant `{s}` (derived | condensed)")))?,
        };
        if ex.variant.is_some() && ex.scheme != SchemeKind::Unbiased1D {
            return Err(Error::config("experiment.variant", "only applies to scheme `unbiased-1d`"));
        }
        let weights = match ex.weights.as_deref() {
            None => DiscountWeights::Frozen,
            Some(s) => DiscountWeights::parse(s)
                .ok_or_else(|| Error::config("experiment.weights", format!("unknown weights `{s}` (frozen | kernel)")))?,
        };
        if ex.weights.is_some() && ex.scheme != SchemeKind::UnbiasedND {
            return Err(Error::config("experiment.weights", "only applies to scheme `unbiased-nd`"));
        }
        let checkpoints = ex.checkpoints.unwrap_or_default();
        if checkpoints.windows(2).any(|w| w[0] >= w[1]) || checkpoints.first() == Some(&0) {
            return Err(Error::config("experiment.checkpoints", "must be positive and strictly increasing"));
        }
        if !checkpoints.is_empty() && ex.trace_output.is_none() {
            return Err(Error::config("experiment.trace_output", "required when checkpoints are given"));
        }
        if ex.diagnostics.is_some() && (sweep.len() != 1 || !ex.scheme.is_unbiased()) {
            return Err(Error::config(
                "experiment.diagnostics",
                "per-path diagnostics need an unbiased scheme and a single cell",
            ));
        }
        let cfg = ExperimentConfig {
            scheme: ex.scheme,
            maturity: ex.maturity,
            sweep,
            n_paths: ex.n_paths,
            seed: ex.seed,
            variant,
            weights,
            checkpoints,
            output: ex.output,
            trace_output: ex.trace_output,
            diagnostics: ex.diagnostics,
            model: raw.model,
            payoff: raw.payoff,
        };
        let model = cfg.build_model()?;
        if matches!(model, BuiltModel::Multi(..)) && cfg.scheme != SchemeKind::UnbiasedND {
            return Err(Error::config(
                "model.name",
                format!("scheme `{}` needs a one-dimensional model", cfg.scheme.name()),
            ));
        }
        Ok(cfg)
    }

    pub fn build_model(&self) -> Result<BuiltModel> {
        Ok(match self.model.clone() {
            ModelConfig::BlackScholes { s0, mu0, sigma0, r } => {
                BuiltModel::One(Box::new(BlackScholes { mu0, sigma0, r }), s0)
            }
            ModelConfig::ConstantCoeff { s0, m, s, r } => BuiltModel::One(Box::new(ConstantCoeff { m, s, r }), s0),
            ModelConfig::Cev {
                s0,
                mu0,
                sigma0,
                beta,
                r,
            } => BuiltModel::One(Box::new(Cev { mu0, sigma0, beta, r }), s0),
            ModelConfig::GaussianRate1D { x0, r0, eps } => {
                BuiltModel::Multi(Box::new(GaussianRate1D { r0, eps }), vec![x0])
            }
            ModelConfig::NdLognormal { x0, mu, sigma, rho, r } => {
                let d = x0.len();
                if d == 0 || mu.len() != d || sigma.len() != d {
                    return Err(Error::config("model.x0", "x0, mu and sigma must have the same positive length"));
                }
                BuiltModel::Multi(Box::new(NdLognormal { mu, sigma, rho, r }), x0)
            }
            ModelConfig::ConstantCoeffND { x0, mu, cov, r } => {
                let d = x0.len();
                if d == 0 || mu.len() != d || cov.len() != d || cov.iter().any(|row| row.len() != d) {
                    return Err(Error::config("model.cov", "x0, mu and cov must have matching dimension"));
                }
                let rows: Vec<&[f64]> = cov.iter().map(|r| r.as_slice()).collect();
                BuiltModel::Multi(
                    Box::new(ConstantCoeffND {
                        mu,
                        cov: Matrix::from_rows(&rows),
                        r,
                    }),
                    x0,
                )
            }
        })
    }

    pub fn build_payoff(&self) -> Box<dyn Payoff> {
        match self.payoff.clone() {
            PayoffConfig::Put { strike } => Box::new(Put { strike }),
            PayoffConfig::Call { strike } => Box::new(Call { strike }),
            PayoffConfig::Constant { value } => Box::new(Constant(value)),
            PayoffConfig::Linear { weights } => Box::new(Linear { weights }),
            PayoffConfig::Polynomial { coeffs } => Box::new(Polynomial { coeffs }),
            PayoffConfig::BasketPut { strike, weights } => Box::new(BasketPut { strike, weights }),
        }
    }

    /// Seed of sweep cell `i`.
    pub fn cell_seed(&self, i: usize) -> u64 {
        derive_seed(self.seed, i as u64)
    }
}

/// A model built from its configuration, with its initial state.
pub enum BuiltModel {
    One(Box<dyn Model1D>, f64),
    Multi(Box<dyn ModelND>, Vec<f64>),
}

/// Per-path evaluator for one cell, returning the discounted contribution.
type PathFn<'a> = Box<dyn Fn(u64, &mut Diagnostics) -> Result<f64> + Sync + 'a>;

fn with_cell<R>(cfg: &ExperimentConfig, i: usize, f: impl FnOnce(PathFn<'_>) -> Result<R>) -> Result<R> {
    let model = cfg.build_model()?;
    let payoff = cfg.build_payoff();
    let seed = cfg.cell_seed(i);
    match (cfg.scheme, &cfg.sweep, &model) {
        (SchemeKind::Unbiased1D, Sweep::Lambda(ls), BuiltModel::One(m, s0)) => {
            let e = Unbiased1D::new(m.as_ref(), payoff.as_ref(), *s0, cfg.maturity, ls[i])?.with_variant(cfg.variant);
            f(Box::new(move |k, diag| {
                let out = e.simulate(StreamKey::new(seed, k))?;
                diag.jumps += out.p as u64;
                diag.floored_segments += out.floored as u64;
                Ok(out.discounted())
            }))
        }
        (SchemeKind::UnbiasedND, Sweep::Lambda(ls), _) => {
            let embedded;
            let (m, x0): (&dyn ModelND, Vec<f64>) = match &model {
                BuiltModel::Multi(m, x0) => (m.as_ref(), x0.clone()),
                BuiltModel::One(m, s0) => {
                    embedded = Embed1D(Shared(m.as_ref()));
                    (&embedded, vec![*s0])
                }
            };
            let e = UnbiasedND::new(m, payoff.as_ref(), x0, cfg.maturity, ls[i])?.with_weights(cfg.weights);
            f(Box::new(move |k, diag| {
                let out = e.simulate(StreamKey::new(seed, k))?;
                diag.jumps += out.p as u64;
                diag.floored_segments += out.floored as u64;
                Ok(out.contribution)
            }))
        }
        (SchemeKind::Euler | SchemeKind::Milstein, Sweep::Steps(ns), BuiltModel::One(m, s0)) => {
            let scheme = if cfg.scheme == SchemeKind::Euler {
                Scheme::Euler
            } else {
                Scheme::Milstein
            };
            let n = ns[i];
            let dt = cfg.maturity / n as f64;
            let sd = dt.sqrt();
            let disc = crate::model::discount_factor(m.as_ref(), cfg.maturity);
            let (m, s0, payoff) = (m.as_ref(), *s0, payoff.as_ref());
            f(Box::new(move |k, _| {
                let mut rng = StreamKey::new(seed, k).stream();
                let mut s = s0;
                for j in 0..n {
                    s = scheme.step(j as f64 * dt, s, dt, sd * crate::rng::standard_normal(&mut rng), m);
                }
                Ok(disc * payoff.value(&[s]))
            }))
        }
        _ => Err(Error::config("experiment.scheme", "scheme, sweep and model do not fit together")),
    }
}

/// Borrowed 1D model usable inside [`Embed1D`].
struct Shared<'a>(&'a dyn Model1D);

impl Model1D for Shared<'_> {
    fn mu(&self, t: f64, s: f64) -> f64 {
        self.0.mu(t, s)
    }
    fn sigma(&self, t: f64, s: f64) -> f64 {
        self.0.sigma(t, s)
    }
    fn dmu_ds(&self, t: f64, s: f64) -> f64 {
        self.0.dmu_ds(t, s)
    }
    fn dsigma_ds(&self, t: f64, s: f64) -> f64 {
        self.0.dsigma_ds(t, s)
    }
    fn rate(&self, t: f64) -> f64 {
        self.0.rate(t)
    }
    fn constant_rate(&self) -> Option<f64> {
        self.0.constant_rate()
    }
    fn domain(&self) -> (f64, f64) {
        self.0.domain()
    }
}

/// Runs sweep cell `i`.
pub fn run_cell(cfg: &ExperimentConfig, i: usize) -> Result<EstimatorResult> {
    with_cell(cfg, i, |path| crate::stats::run_paths(cfg.n_paths, path))
}

/// Outcome of one sweep cell.
#[derive(Debug, Clone, PartialEq)]
pub struct CellResult {
    pub scheme: &'static str,
    pub param: String,
    pub outcome: std::result::Result<EstimatorResult, Error>,
}

/// Runs every cell in order. Failing cells are kept as error outcomes.
pub fn run_sweep(cfg: &ExperimentConfig) -> Vec<CellResult> {
    (0..cfg.sweep.len())
        .map(|i| {
            let outcome = run_cell(cfg, i);
            if let Err(e) = &outcome {
                log::error!("cell {} ({}): {e}", i, cfg.sweep.label(i));
            }
            CellResult {
                scheme: cfg.scheme.name(),
                param: cfg.sweep.label(i),
                outcome,
            }
        })
        .collect()
}

fn num(x: f64) -> String {
    format!("{x:.9e}")
}

fn csv_text(s: &str) -> String {
    s.replace([',', '\n', '\r'], " ")
}

/// Sweep rows as CSV. Error rows carry `error: <message>` in the mean
/// column and leave the numeric columns empty.
pub fn sweep_csv(rows: &[CellResult]) -> String {
    let mut out = String::new();
    out.push_str(SWEEP_HEADER);
    out.push('\n');
    for r in rows {
        match &r.outcome {
            Ok(e) => {
                let _ = writeln!(
                    out,
                    "{},{},{},{},{},{},{}",
                    r.scheme,
                    r.param,
                    num(e.mean),
                    num(e.stderr),
                    num(e.ci99),
                    num(e.variance),
                    num(e.seconds)
                );
            }
            Err(err) => {
                let _ = writeln!(out, "{},{},error: {},,,,", r.scheme, r.param, csv_text(&err.to_string()));
            }
        }
    }
    out
}

/// One convergence-trace row.
#[derive(Debug, Clone, PartialEq)]
pub struct TraceRow {
    pub scheme: &'static str,
    pub param: String,
    pub n_paths: u64,
    pub mean: f64,
    pub stderr: f64,
    pub ci99: f64,
}

/// Running estimate at each configured checkpoint, for every cell, in a
/// single pass per cell.
pub fn convergence_trace(cfg: &ExperimentConfig) -> Result<Vec<TraceRow>> {
    let mut rows = Vec::new();
    for i in 0..cfg.sweep.len() {
        let cps = with_cell(cfg, i, |path| run_checkpoints(&cfg.checkpoints, path))?;
        rows.extend(cps.into_iter().map(|c| TraceRow {
            scheme: cfg.scheme.name(),
            param: cfg.sweep.label(i),
            n_paths: c.n_paths,
            mean: c.mean,
            stderr: c.stderr,
            ci99: c.ci99,
        }));
    }
    Ok(rows)
}

pub fn trace_csv(rows: &[TraceRow]) -> String {
    let mut out = String::new();
    out.push_str(TRACE_HEADER);
    out.push('\n');
    for r in rows {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{}",
            r.scheme,
            r.param,
            r.n_paths,
            num(r.mean),
            num(r.stderr),
            num(r.ci99)
        );
    }
    out
}

/// Writes `path_index,p,P_T,discount` for every path of the single cell.
///
/// For the 1D engine `P_T` is undiscounted and `discount` is `exp(-∫r)`; for
/// the ND engine `P_T` is the discounted contribution and `discount` is the
/// stochastic factor accumulated up to the last Poisson time.
pub fn write_path_diagnostics(cfg: &ExperimentConfig, w: &mut dyn Write) -> Result<()> {
    let model = cfg.build_model()?;
    let payoff = cfg.build_payoff();
    let seed = cfg.cell_seed(0);
    let lambda = match &cfg.sweep {
        Sweep::Lambda(l) if l.len() == 1 => l[0],
        _ => return Err(Error::config("experiment.diagnostics", "needs a single intensity")),
    };
    writeln!(w, "{PATHS_HEADER}")?;
    match (cfg.scheme, &model) {
        (SchemeKind::Unbiased1D, BuiltModel::One(m, s0)) => {
            let e = Unbiased1D::new(m.as_ref(), payoff.as_ref(), *s0, cfg.maturity, lambda)?.with_variant(cfg.variant);
            for k in 0..cfg.n_paths {
                let o = e.simulate(StreamKey::new(seed, k))?;
                writeln!(w, "{k},{},{},{}", o.p, num(o.contribution), num(o.discount))?;
            }
        }
        (SchemeKind::UnbiasedND, _) => {
            let embedded;
            let (m, x0): (&dyn ModelND, Vec<f64>) = match &model {
                BuiltModel::Multi(m, x0) => (m.as_ref(), x0.clone()),
                BuiltModel::One(m, s0) => {
                    embedded = Embed1D(Shared(m.as_ref()));
                    (&embedded, vec![*s0])
                }
            };
            let e = UnbiasedND::new(m, payoff.as_ref(), x0, cfg.maturity, lambda)?.with_weights(cfg.weights);
            for k in 0..cfg.n_paths {
                let o = e.simulate(StreamKey::new(seed, k))?;
                writeln!(w, "{k},{},{},{}", o.p, num(o.contribution), num(o.discount))?;
            }
        }
        _ => return Err(Error::config("experiment.diagnostics", "needs an unbiased scheme")),
    }
    Ok(())
}
