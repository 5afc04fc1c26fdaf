use serde::{Deserialize, Serialize};

use super::ModelError;
use crate::features::SparseVector;
use crate::scalar::Scalar;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct NaiveBayesParams {
    /// Additive (Laplace) smoothing.
    pub alpha: f64,
}

impl Default for NaiveBayesParams {
    fn default() -> Self {
        NaiveBayesParams { alpha: 1.0 }
    }
}

impl NaiveBayesParams {
    pub fn validate(&self) -> Result<(), ModelError> {
        if !(self.alpha > 0.0 && self.alpha.is_finite()) {
            return Err(ModelError::InvalidHyperparams("alpha must be positive and finite".into()));
        }
        Ok(())
    }
}

/// Multinomial naive Bayes over (possibly fractional) feature mass.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct NaiveBayesModel<T> {
    /// Indexed by label: `[negative, positive]`. A class absent from
    /// training gets `-inf`.
    pub(crate) log_prior: [T; 2],
    pub(crate) log_likelihood: [Vec<T>; 2],
}

impl<T: Scalar> NaiveBayesModel<T> {
    pub fn fit(params: &NaiveBayesParams, x: &[SparseVector<T>], y: &[usize]) -> Self {
        let dim = x[0].dim();
        let alpha = T::of(params.alpha);
        let mut mass = [vec![T::zero(); dim], vec![T::zero(); dim]];
        let mut counts = [0usize; 2];
        for (xi, &c) in x.iter().zip(y) {
            counts[c] += 1;
            for (j, v) in xi.iter() {
                mass[c][j] += v;
            }
        }
        let n = T::of_usize(x.len());
        let log_prior = counts.map(|c| (T::of_usize(c) / n).ln());
        let log_likelihood = mass.map(|m| {
            let denom = m.iter().copied().sum::<T>() + alpha * T::of_usize(dim);
            m.iter().map(|&v| ((v + alpha) / denom).ln()).collect()
        });
        NaiveBayesModel {
            log_prior,
            log_likelihood,
        }
    }

    /// Unnormalized joint log-probabilities per class.
    pub fn joint_log_likelihood(&self, x: &SparseVector<T>) -> [T; 2] {
        [0, 1].map(|c| self.log_prior[c] + x.dot_dense(&self.log_likelihood[c]))
    }

    /// Posterior `[P(negative|x), P(positive|x)]`.
    pub fn posterior(&self, x: &SparseVector<T>) -> [T; 2] {
        let jll = self.joint_log_likelihood(x);
        let m = jll[0].max(jll[1]);
        let e = jll.map(|v| (v - m).exp());
        let z = e[0] + e[1];
        e.map(|v| v / z)
    }

    pub fn log_prior(&self) -> [T; 2] {
        self.log_prior
    }

    pub fn log_likelihood(&self) -> &[Vec<T>; 2] {
        &self.log_likelihood
    }
}
