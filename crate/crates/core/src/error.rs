use thiserror::Error;

/// Errors produced by models, engines and the experiment harness.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    /// An argument lies outside the domain of a closed-form formula or sampler.
    #[error("domain error: {0}")]
    Domain(String),

    /// The local volatility vanished or turned negative at a visited state.
    #[error("non-positive volatility {sigma} at t={t}, S={spot} (path {path})")]
    NonPositiveVol {
        t: f64,
        spot: f64,
        sigma: f64,
        path: u64,
    },

    /// A Cholesky pivot was not strictly positive.
    #[error("covariance not positive definite (pivot {pivot} = {value}){context}")]
    NotPositiveDefinite {
        pivot: usize,
        value: f64,
        context: String,
    },

    /// A triangular matrix with a zero on its diagonal.
    #[error("singular triangular matrix (diagonal entry {0} is zero)")]
    Singular(usize),

    /// A simulated state left the model's admissible box.
    #[error("state left the admissible domain at t={t} (path {path}): {state:?}")]
    DomainExcursion { t: f64, state: Vec<f64>, path: u64 },

    /// Invalid experiment configuration.
    #[error("config error{}: {message}", key.as_ref().map(|k| format!(" at `{k}`")).unwrap_or_default())]
    Config {
        key: Option<String>,
        message: String,
    },

    #[error("i/o error: {0}")]
    Io(String),
}

impl Error {
    pub(crate) fn config(key: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Config {
            key: Some(key.into()),
            message: message.into(),
        }
    }

    /// Attach a path index to engine errors that carry one.
    pub(crate) fn on_path(self, index: u64) -> Self {
        match self {
            Error::NonPositiveVol {
                t, spot, sigma, ..
            } => Error::NonPositiveVol {
                t,
                spot,
                sigma,
                path: index,
            },
            Error::DomainExcursion { t, state, .. } => Error::DomainExcursion {
                t,
                state,
                path: index,
            },
            Error::NotPositiveDefinite {
                pivot,
                value,
                context,
            } if context.is_empty() => Error::NotPositiveDefinite {
                pivot,
                value,
                context: format!(" on path {index}"),
            },
            other => other,
        }
    }

    /// True for configuration problems (CLI exit code 2), false for engine failures.
    pub fn is_config(&self) -> bool {
        matches!(self, Error::Config { .. } | Error::Io(_))
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
