use serde::{Deserialize, Serialize};

use super::{log_loss, ModelError};
use crate::features::SparseVector;
use crate::scalar::{sigmoid, Scalar};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct LogRegParams {
    pub learning_rate: f64,
    pub epochs: usize,
    pub l2: f64,
    /// Stop once an accepted epoch improves the loss by less than this.
    pub tol: f64,
}

impl Default for LogRegParams {
    fn default() -> Self {
        LogRegParams {
            learning_rate: 0.1,
            epochs: 500,
            l2: 1e-4,
            tol: 1e-6,
        }
    }
}

impl LogRegParams {
    pub fn validate(&self) -> Result<(), ModelError> {
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(ModelError::InvalidHyperparams("learning_rate must be positive".into()));
        }
        if !(self.l2 >= 0.0 && self.tol >= 0.0) {
            return Err(ModelError::InvalidHyperparams("l2 and tol must be non-negative".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct LogRegModel<T> {
    pub(crate) weights: Vec<T>,
    pub(crate) bias: T,
    /// Loss at initialization and after every accepted epoch.
    pub(crate) loss_history: Vec<T>,
}

/// Mean log-loss plus `l2/2 * |w|^2` (bias unpenalized) and its gradient
/// with respect to `(w, b)`.
pub fn loss_and_gradient<T: Scalar>(
    weights: &[T],
    bias: T,
    x: &[SparseVector<T>],
    y: &[T],
    l2: T,
) -> (T, Vec<T>, T) {
    let n = T::of_usize(x.len());
    let mut grad = vec![T::zero(); weights.len()];
    let mut grad_b = T::zero();
    let mut loss = T::zero();
    for (xi, &yi) in x.iter().zip(y) {
        let z = xi.dot_dense(weights) + bias;
        loss += log_loss(z, yi);
        let r = sigmoid(z) - yi;
        for (j, v) in xi.iter() {
            grad[j] += r * v;
        }
        grad_b += r;
    }
    let half = T::of(0.5);
    let mut penalty = T::zero();
    for (g, &w) in grad.iter_mut().zip(weights) {
        *g = *g / n + l2 * w;
        penalty += w * w;
    }
    (loss / n + half * l2 * penalty, grad, grad_b / n)
}

impl<T: Scalar> LogRegModel<T> {
    /// Full-batch gradient descent from zero. A step that would raise the
    /// loss is rejected and the step size halved.
    pub fn fit(params: &LogRegParams, x: &[SparseVector<T>], y: &[usize]) -> Self {
        let dim = x[0].dim();
        let yt: Vec<T> = y.iter().map(|&l| T::of_usize(l)).collect();
        let l2 = T::of(params.l2);
        let tol = T::of(params.tol);
        let mut lr = T::of(params.learning_rate);
        let mut w = vec![T::zero(); dim];
        let mut b = T::zero();
        let (mut loss, mut gw, mut gb) = loss_and_gradient(&w, b, x, &yt, l2);
        let mut loss_history = vec![loss];
        for _ in 0..params.epochs {
            let w_next: Vec<T> = w.iter().zip(&gw).map(|(&wi, &g)| wi - lr * g).collect();
            let b_next = b - lr * gb;
            let (next_loss, next_gw, next_gb) = loss_and_gradient(&w_next, b_next, x, &yt, l2);
            if !next_loss.is_finite() || next_loss > loss {
                lr /= T::of(2.0);
                if lr < T::epsilon() {
                    break;
                }
                continue;
            }
            let improvement = loss - next_loss;
            (w, b, loss, gw, gb) = (w_next, b_next, next_loss, next_gw, next_gb);
            loss_history.push(loss);
            if improvement < tol {
                break;
            }
        }
        LogRegModel {
            weights: w,
            bias: b,
            loss_history,
        }
    }

    pub fn from_parts(weights: Vec<T>, bias: T) -> Self {
        LogRegModel {
            weights,
            bias,
            loss_history: Vec::new(),
        }
    }

    pub fn decision(&self, x: &SparseVector<T>) -> T {
        x.dot_dense(&self.weights) + self.bias
    }

    pub fn weights(&self) -> &[T] {
        &self.weights
    }

    pub fn bias(&self) -> T {
        self.bias
    }

    pub fn loss_history(&self) -> &[T] {
        &self.loss_history
    }
}
