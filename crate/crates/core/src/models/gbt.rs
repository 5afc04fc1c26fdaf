use serde::{Deserialize, Serialize};

use super::tree::{partition, GradPair, Node, NodeColumns, Tree, TreeBuilder};
use super::{log_loss, ModelError};
use crate::features::SparseVector;
use crate::scalar::{sigmoid, Scalar};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GbtParams {
    pub rounds: usize,
    pub learning_rate: f64,
    pub max_depth: usize,
    pub lambda: f64,
    pub gamma: f64,
    /// Minimum hessian sum in each child of a split.
    pub min_child_weight: f64,
}

impl Default for GbtParams {
    fn default() -> Self {
        GbtParams {
            rounds: 100,
            learning_rate: 0.3,
            max_depth: 6,
            lambda: 1.0,
            gamma: 0.0,
            min_child_weight: 1.0,
        }
    }
}

impl GbtParams {
    pub fn validate(&self) -> Result<(), ModelError> {
        let bad = |m: &str| Err(ModelError::InvalidHyperparams(m.into()));
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return bad("learning_rate must be positive");
        }
        if !(self.lambda >= 0.0 && self.gamma >= 0.0 && self.min_child_weight >= 0.0) {
            return bad("lambda, gamma and min_child_weight must be non-negative");
        }
        Ok(())
    }
}

/// Second-order boosted regression trees on the logistic loss.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct GbtModel<T> {
    pub(crate) base_score: T,
    pub(crate) learning_rate: T,
    pub(crate) trees: Vec<Tree<T>>,
    /// Mean training log-loss before any tree, then after each round.
    pub(crate) training_loss: Vec<T>,
    pub(crate) dim: usize,
}

impl<T: Scalar> GbtModel<T> {
    pub fn fit(params: &GbtParams, x: &[SparseVector<T>], y: &[usize]) -> Self {
        let n = x.len();
        let positives = y.iter().filter(|&&l| l == 1).count();
        let eps = T::epsilon().sqrt();
        let prior = (T::of_usize(positives) / T::of_usize(n)).max(eps).min(T::one() - eps);
        let base_score = (prior / (T::one() - prior)).ln();
        let lr = T::of(params.learning_rate);
        let yt: Vec<T> = y.iter().map(|&l| T::of_usize(l)).collect();
        let mut margin = vec![base_score; n];
        let mut training_loss = vec![mean_loss(&margin, &yt)];
        let mut trees = Vec::with_capacity(params.rounds);
        for _ in 0..params.rounds {
            let grads: Vec<GradPair<T>> = margin
                .iter()
                .zip(&yt)
                .map(|(&m, &t)| {
                    let p = sigmoid(m);
                    GradPair {
                        g: p - t,
                        h: p * (T::one() - p),
                    }
                })
                .collect();
            let tree = grow(params, x, &grads);
            for (m, xi) in margin.iter_mut().zip(x) {
                *m += lr * tree.evaluate(xi);
            }
            training_loss.push(mean_loss(&margin, &yt));
            trees.push(tree);
        }
        GbtModel {
            base_score,
            learning_rate: lr,
            trees,
            training_loss,
            dim: x[0].dim(),
        }
    }

    pub fn margin(&self, x: &SparseVector<T>) -> T {
        self.base_score
            + self
                .trees
                .iter()
                .map(|t| self.learning_rate * t.evaluate(x))
                .sum::<T>()
    }

    pub fn base_score(&self) -> T {
        self.base_score
    }

    pub fn trees(&self) -> &[Tree<T>] {
        &self.trees
    }

    pub fn training_loss(&self) -> &[T] {
        &self.training_loss
    }
}

fn mean_loss<T: Scalar>(margin: &[T], y: &[T]) -> T {
    margin.iter().zip(y).map(|(&m, &t)| log_loss(m, t)).sum::<T>() / T::of_usize(margin.len())
}

fn grow<T: Scalar>(params: &GbtParams, x: &[SparseVector<T>], grads: &[GradPair<T>]) -> Tree<T> {
    let lambda = T::of(params.lambda);
    let gamma = T::of(params.gamma);
    let mcw = T::of(params.min_child_weight);
    let half = T::of(0.5);
    let score = |s: GradPair<T>| s.g * s.g / (s.h + lambda);
    let weight = |s: GradPair<T>| -s.g / (s.h + lambda);

    let mut builder = TreeBuilder::new();
    let root = builder.reserve();
    let mut stack = vec![(root, (0..x.len()).collect::<Vec<usize>>(), 0usize)];
    while let Some((at, rows, depth)) = stack.pop() {
        let total = rows
            .iter()
            .fold(GradPair::default(), |acc: GradPair<T>, &r| GradPair {
                g: acc.g + grads[r].g,
                h: acc.h + grads[r].h,
            });
        let leaf = Node::Leaf { value: weight(total) };
        if depth >= params.max_depth || rows.len() < 2 {
            builder.set(at, leaf);
            continue;
        }
        let cols = NodeColumns::gather(x, &rows);
        let parent_score = score(total);
        let split = cols.best_split(&cols.nonconstant(), |r| grads[r], total, |l, r| {
            (l.h >= mcw && r.h >= mcw).then(|| half * (score(l) + score(r) - parent_score) - gamma)
        });
        match split {
            Some(s) if s.gain > T::zero() => {
                let (l_rows, r_rows) = partition(x, &rows, &s);
                let l = builder.reserve();
                let r = builder.reserve();
                builder.set(
                    at,
                    Node::Split {
                        feature: s.feature,
                        threshold: s.threshold,
                        left: l,
                        right: r,
                    },
                );
                stack.push((r, r_rows, depth + 1));
                stack.push((l, l_rows, depth + 1));
            }
            _ => builder.set(at, leaf),
        }
    }
    builder.finish()
}
