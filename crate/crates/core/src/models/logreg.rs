use serde::{Deserialize, Serialize};

use super::design::DesignMatrix;
use super::sigmoid;
use crate::error::{Error, Result};

const MAX_HALVINGS: usize = 60;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogregParams {
    /// Intercept first, then one weight per feature.
    pub weights: Vec<f64>,
    pub iterations: usize,
    /// Euclidean norm of the mean gradient at the returned weights.
    pub gradient_norm: f64,
    pub converged: bool,
}

impl LogregParams {
    pub fn n_features(&self) -> usize {
        self.weights.len() - 1
    }

    pub fn score(&self, x: &[f64]) -> Result<f64> {
        if x.len() != self.n_features() {
            return Err(Error::DimensionMismatch {
                expected: self.n_features(),
                got: x.len(),
            });
        }
        if x.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite);
        }
        Ok(sigmoid(linear(&self.weights, x)))
    }
}

fn linear(w: &[f64], x: &[f64]) -> f64 {
    w[0] + w[1..].iter().zip(x).map(|(a, b)| a * b).sum::<f64>()
}

/// ln(1 + eᶻ) without overflow.
fn softplus(z: f64) -> f64 {
    if z > 0.0 {
        z + (-z).exp().ln_1p()
    } else {
        z.exp().ln_1p()
    }
}

/// Cross-entropy E(w) = −Σ [t ln y + (1 − t) ln(1 − y)] with y = σ(wᵀx̃),
/// x̃ = (1, x).
pub fn cross_entropy(d: &DesignMatrix, w: &[f64]) -> f64 {
    d.rows
        .iter()
        .zip(&d.labels)
        .map(|(x, &t)| {
            let z = linear(w, x);
            // −ln σ(z) = softplus(−z), −ln(1 − σ(z)) = softplus(z)
            if t {
                softplus(-z)
            } else {
                softplus(z)
            }
        })
        .sum()
}

/// ∇E(w) = Σ (y_n − t_n) x̃_n.
pub fn cross_entropy_gradient(d: &DesignMatrix, w: &[f64]) -> Vec<f64> {
    let mut g = vec![0.0; w.len()];
    for (x, &t) in d.rows.iter().zip(&d.labels) {
        let r = sigmoid(linear(w, x)) - if t { 1.0 } else { 0.0 };
        g[0] += r;
        for (gj, xj) in g[1..].iter_mut().zip(x) {
            *gj += r * xj;
        }
    }
    g
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|a| a * a).sum::<f64>().sqrt()
}

/// Full-batch gradient descent on the mean cross-entropy. A step that would
/// raise the loss is halved until it does not.
pub fn fit_logreg(
    d: &DesignMatrix,
    learning_rate: f64,
    max_iters: usize,
    tol: f64,
) -> Result<LogregParams> {
    if !(learning_rate > 0.0 && learning_rate.is_finite()) {
        return Err(Error::InvalidParameter(format!(
            "learning_rate must be positive, got {learning_rate}"
        )));
    }
    if !(tol > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "tol must be positive, got {tol}"
        )));
    }
    d.require_both_classes()?;
    let n = d.n() as f64;
    let mut w = vec![0.0; d.p() + 1];
    let mut loss = cross_entropy(d, &w);
    let mut grad: Vec<f64> = cross_entropy_gradient(d, &w)
        .iter()
        .map(|g| g / n)
        .collect();
    let mut iterations = 0;
    let mut converged = norm(&grad) < tol;

    while !converged && iterations < max_iters {
        iterations += 1;
        let mut step = learning_rate;
        let mut accepted = false;
        for _ in 0..MAX_HALVINGS {
            let cand: Vec<f64> = w.iter().zip(&grad).map(|(wi, gi)| wi - step * gi).collect();
            let cand_loss = cross_entropy(d, &cand);
            if !cand_loss.is_finite() || cand.iter().any(|v| !v.is_finite()) {
                return Err(Error::Divergence);
            }
            if cand_loss <= loss {
                w = cand;
                loss = cand_loss;
                accepted = true;
                break;
            }
            step /= 2.0;
        }
        if !accepted {
            // No descent is representable at this precision.
            break;
        }
        grad = cross_entropy_gradient(d, &w)
            .iter()
            .map(|g| g / n)
            .collect();
        converged = norm(&grad) < tol;
    }
    if !loss.is_finite() {
        return Err(Error::Divergence);
    }
    Ok(LogregParams {
        gradient_norm: norm(&grad),
        weights: w,
        iterations,
        converged,
    })
}
