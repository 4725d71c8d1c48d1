//! Tagged moment values: exact rationals or Monte-Carlo estimates with error bars.

use serde::Serialize;

use crate::rational::{format_rational, q_to_f64, Q};

/// A moment is either an exact rational, or a Monte-Carlo estimate that carries
/// its standard error, sample count and seed. Never an untagged float.
#[derive(Clone, Debug, PartialEq)]
pub enum MomentValue {
    Exact(Q),
    MonteCarlo { mean: f64, std_error: f64, samples: u64, seed: u64 },
}

/// JSON-friendly view of a [`MomentValue`].
#[derive(Clone, Debug, Serialize)]
pub struct MomentReport {
    pub method: &'static str,
    pub value: String,
    pub float: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub std_error: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub samples: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
}

impl MomentValue {
    pub fn zero() -> Self {
        MomentValue::Exact(Q::from_integer(0.into()))
    }

    pub fn one() -> Self {
        MomentValue::Exact(Q::from_integer(1.into()))
    }

    pub fn is_exact(&self) -> bool {
        matches!(self, MomentValue::Exact(_))
    }

    pub fn exact(&self) -> Option<&Q> {
        match self {
            MomentValue::Exact(q) => Some(q),
            MomentValue::MonteCarlo { .. } => None,
        }
    }

    pub fn to_f64(&self) -> f64 {
        match self {
            MomentValue::Exact(q) => q_to_f64(q),
            MomentValue::MonteCarlo { mean, .. } => *mean,
        }
    }

    /// Standard error; zero for exact values.
    pub fn std_error(&self) -> f64 {
        match self {
            MomentValue::Exact(_) => 0.0,
            MomentValue::MonteCarlo { std_error, .. } => *std_error,
        }
    }

    fn mc_meta(a: &Self, b: &Self) -> (u64, u64) {
        for v in [a, b] {
            if let MomentValue::MonteCarlo { samples, seed, .. } = v {
                return (*samples, *seed);
            }
        }
        (0, 0)
    }

    /// Sum; standard errors add linearly (a conservative bound for correlated estimates).
    pub fn add(&self, other: &Self) -> Self {
        match (self, other) {
            (MomentValue::Exact(a), MomentValue::Exact(b)) => MomentValue::Exact(a + b),
            _ => {
                let (samples, seed) = Self::mc_meta(self, other);
                MomentValue::MonteCarlo {
                    mean: self.to_f64() + other.to_f64(),
                    std_error: self.std_error() + other.std_error(),
                    samples,
                    seed,
                }
            }
        }
    }

    pub fn neg(&self) -> Self {
        match self {
            MomentValue::Exact(a) => MomentValue::Exact(-a),
            MomentValue::MonteCarlo { mean, std_error, samples, seed } => {
                MomentValue::MonteCarlo { mean: -mean, std_error: *std_error, samples: *samples, seed: *seed }
            }
        }
    }

    pub fn sub(&self, other: &Self) -> Self {
        self.add(&other.neg())
    }

    /// Product with first-order error propagation.
    pub fn mul(&self, other: &Self) -> Self {
        match (self, other) {
            (MomentValue::Exact(a), MomentValue::Exact(b)) => MomentValue::Exact(a * b),
            _ => {
                let (samples, seed) = Self::mc_meta(self, other);
                let (x, y) = (self.to_f64(), other.to_f64());
                MomentValue::MonteCarlo {
                    mean: x * y,
                    std_error: x.abs() * other.std_error() + y.abs() * self.std_error() + self.std_error() * other.std_error(),
                    samples,
                    seed,
                }
            }
        }
    }

    pub fn scale(&self, factor: &Q) -> Self {
        self.mul(&MomentValue::Exact(factor.clone()))
    }

    pub fn report(&self) -> MomentReport {
        match self {
            MomentValue::Exact(q) => MomentReport {
                method: "exact",
                value: format_rational(q),
                float: q_to_f64(q),
                std_error: None,
                samples: None,
                seed: None,
            },
            MomentValue::MonteCarlo { mean, std_error, samples, seed } => MomentReport {
                method: "monte_carlo",
                value: format!("~{mean:e}"),
                float: *mean,
                std_error: Some(*std_error),
                samples: Some(*samples),
                seed: Some(*seed),
            },
        }
    }
}
