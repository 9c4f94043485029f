//! Terminal payoffs `h(X_T)`.

/// Regularity class of a payoff; documents the variance behavior to expect.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Smoothness {
    Smooth,
    PiecewiseLinear,
}

/// A deterministic terminal function.
pub trait Payoff: Send + Sync {
    fn value(&self, x: &[f64]) -> f64;
    fn smoothness(&self) -> Smoothness;
}

/// `max(K - x_0, 0)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Put {
    pub strike: f64,
}

impl Payoff for Put {
    fn value(&self, x: &[f64]) -> f64 {
        (self.strike - x[0]).max(0.0)
    }
    fn smoothness(&self) -> Smoothness {
        Smoothness::PiecewiseLinear
    }
}

/// `max(x_0 - K, 0)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Call {
    pub strike: f64,
}

impl Payoff for Call {
    fn value(&self, x: &[f64]) -> f64 {
        (x[0] - self.strike).max(0.0)
    }
    fn smoothness(&self) -> Smoothness {
        Smoothness::PiecewiseLinear
    }
}

/// `h ≡ c`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Constant(pub f64);

impl Payoff for Constant {
    fn value(&self, _x: &[f64]) -> f64 {
        self.0
    }
    fn smoothness(&self) -> Smoothness {
        Smoothness::Smooth
    }
}

/// `h(x) = Σ w_α x_α`; an empty weight vector means `h(x) = x_0`.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Linear {
    pub weights: Vec<f64>,
}

impl Payoff for Linear {
    fn value(&self, x: &[f64]) -> f64 {
        if self.weights.is_empty() {
            x[0]
        } else {
            self.weights.iter().zip(x).map(|(w, v)| w * v).sum()
        }
    }
    fn smoothness(&self) -> Smoothness {
        Smoothness::Smooth
    }
}

/// `h(x) = Σ c_k x_0^k`.
#[derive(Debug, Clone, PartialEq)]
pub struct Polynomial {
    pub coeffs: Vec<f64>,
}

impl Payoff for Polynomial {
    fn value(&self, x: &[f64]) -> f64 {
        self.coeffs.iter().rev().fold(0.0, |acc, c| acc * x[0] + c)
    }
    fn smoothness(&self) -> Smoothness {
        Smoothness::Smooth
    }
}

/// `max(K - Σ w_α x_α, 0)`; empty weights mean the equally weighted average.
#[derive(Debug, Clone, PartialEq)]
pub struct BasketPut {
    pub strike: f64,
    pub weights: Vec<f64>,
}

impl Payoff for BasketPut {
    fn value(&self, x: &[f64]) -> f64 {
        let basket = if self.weights.is_empty() {
            x.iter().sum::<f64>() / x.len() as f64
        } else {
            self.weights.iter().zip(x).map(|(w, v)| w * v).sum()
        };
        (self.strike - basket).max(0.0)
    }
    fn smoothness(&self) -> Smoothness {
        Smoothness::PiecewiseLinear
    }
}
