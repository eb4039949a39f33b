//! Nonsmooth convex penalties.
//!
//! The proximal map uses the `1/(2η)` scaling:
//! `prox(x, η) = argmin_z h(z) + ‖z − x‖² / (2η)`.

use serde::{Deserialize, Serialize};

use crate::error::{domain, Result};
use crate::numerics::Vector;

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Regularizer {
    #[default]
    Zero,
    L1 {
        lambda: f64,
    },
}

impl Regularizer {
    pub fn l1(lambda: f64) -> Result<Self> {
        if !(lambda >= 0.0) || !lambda.is_finite() {
            return domain(format!(
                "L1 weight must be finite and nonnegative, got {lambda}"
            ));
        }
        Ok(Regularizer::L1 { lambda })
    }

    pub fn lambda(&self) -> f64 {
        match *self {
            Regularizer::Zero => 0.0,
            Regularizer::L1 { lambda } => lambda,
        }
    }

    pub fn value(&self, x: &Vector) -> f64 {
        match *self {
            Regularizer::Zero => 0.0,
            Regularizer::L1 { lambda } => lambda * x.iter().map(|v| v.abs()).sum::<f64>(),
        }
    }

    pub fn prox(&self, x: &Vector, eta: f64) -> Result<Vector> {
        if !(eta > 0.0) {
            return domain(format!("prox step must be positive, got {eta}"));
        }
        Ok(match *self {
            Regularizer::Zero => x.clone(),
            Regularizer::L1 { lambda } => x.map(|v| soft_threshold(v, eta * lambda)),
        })
    }

    /// The element `g ∈ ∂h(x)` closest to `−grad_f`, i.e. the one minimizing
    /// `‖grad_f + g‖`.
    pub fn min_norm_subgradient(&self, x: &Vector, grad_f: &Vector) -> Result<Vector> {
        if x.len() != grad_f.len() {
            return domain(format!(
                "subgradient selection: x has length {}, gradient has length {}",
                x.len(),
                grad_f.len()
            ));
        }
        Ok(match *self {
            Regularizer::Zero => Vector::zeros(x.len()),
            Regularizer::L1 { lambda } => Vector::from_fn(x.len(), |i, _| {
                if x[i] != 0.0 {
                    lambda * x[i].signum()
                } else {
                    (-grad_f[i]).clamp(-lambda, lambda)
                }
            }),
        })
    }
}

pub fn soft_threshold(v: f64, threshold: f64) -> f64 {
    v.signum() * (v.abs() - threshold).max(0.0)
}
