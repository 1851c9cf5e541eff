use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Neuron squashing function. Every kind provides an exact analytic first
/// derivative for the value formula it uses.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ActivationKind {
    Identity,
    Tanh,
    Logistic,
    Relu,
}

impl ActivationKind {
    pub fn value(self, a: f64) -> f64 {
        match self {
            ActivationKind::Identity => a,
            ActivationKind::Tanh => a.tanh(),
            ActivationKind::Logistic => logistic(a),
            ActivationKind::Relu => a.max(0.0),
        }
    }

    /// Derivative at `a`. The relu derivative at the kink `a = 0` is defined
    /// as 0 (one-sided subgradient choice).
    pub fn derivative(self, a: f64) -> f64 {
        match self {
            ActivationKind::Identity => 1.0,
            ActivationKind::Tanh => {
                let t = a.tanh();
                1.0 - t * t
            }
            ActivationKind::Logistic => {
                let s = logistic(a);
                s * (1.0 - s)
            }
            ActivationKind::Relu => {
                if a > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
        }
    }

    /// Checked evaluation of `(value, derivative)`; rejects non-finite input.
    pub fn eval(self, a: f64) -> Result<(f64, f64)> {
        if !a.is_finite() {
            return Err(Error::NonFinite(format!("activation input {a}")));
        }
        Ok((self.value(a), self.derivative(a)))
    }

    pub const ALL: [ActivationKind; 4] = [
        ActivationKind::Identity,
        ActivationKind::Tanh,
        ActivationKind::Logistic,
        ActivationKind::Relu,
    ];

    /// The smooth kinds, safe for finite-difference checks at any point.
    pub const SMOOTH: [ActivationKind; 3] = [
        ActivationKind::Identity,
        ActivationKind::Tanh,
        ActivationKind::Logistic,
    ];
}

pub fn logistic(a: f64) -> f64 {
    // Split on sign so exp never overflows.
    if a >= 0.0 {
        1.0 / (1.0 + (-a).exp())
    } else {
        let e = a.exp();
        e / (1.0 + e)
    }
}
