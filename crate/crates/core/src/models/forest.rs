use rand::seq::index;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Hypergeometric};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::tree::{partition, NodeColumns, Node, Tree, TreeBuilder};
use super::ModelError;
use crate::features::SparseVector;
use crate::scalar::Scalar;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ForestParams {
    pub n_trees: usize,
    /// `None` grows until leaves are pure.
    pub max_depth: Option<usize>,
    pub min_samples_split: usize,
    /// Features drawn per split; `None` means `floor(sqrt(d))`.
    pub max_features: Option<usize>,
    pub bootstrap: bool,
}

impl Default for ForestParams {
    fn default() -> Self {
        ForestParams {
            n_trees: 100,
            max_depth: None,
            min_samples_split: 2,
            max_features: None,
            bootstrap: true,
        }
    }
}

impl ForestParams {
    pub fn validate(&self) -> Result<(), ModelError> {
        if self.n_trees == 0 {
            return Err(ModelError::InvalidHyperparams("n_trees must be >= 1".into()));
        }
        if self.min_samples_split < 2 {
            return Err(ModelError::InvalidHyperparams("min_samples_split must be >= 2".into()));
        }
        if self.max_features == Some(0) {
            return Err(ModelError::InvalidHyperparams("max_features must be >= 1".into()));
        }
        Ok(())
    }
}

/// Bagged Gini trees; each leaf stores 1 for a Positive majority, else 0.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct RandomForestModel<T> {
    pub(crate) trees: Vec<Tree<T>>,
    pub(crate) dim: usize,
}

impl<T: Scalar> RandomForestModel<T> {
    pub fn fit(params: &ForestParams, x: &[SparseVector<T>], y: &[usize], seed: u64) -> Self {
        let dim = x[0].dim();
        let trees = (0..params.n_trees)
            .into_par_iter()
            .map(|t| {
                let tree_seed = crate::providers::derive_seed(seed, &[b"tree", &(t as u64).to_le_bytes()]);
                grow(params, x, y, &mut ChaCha8Rng::seed_from_u64(tree_seed))
            })
            .collect();
        RandomForestModel { trees, dim }
    }

    pub fn trees(&self) -> &[Tree<T>] {
        &self.trees
    }

    /// Fraction of trees voting Positive.
    pub fn vote_fraction(&self, x: &SparseVector<T>) -> T {
        let votes: T = self.trees.iter().map(|t| t.evaluate(x)).sum();
        votes / T::of_usize(self.trees.len())
    }
}

fn grow<T: Scalar>(params: &ForestParams, x: &[SparseVector<T>], y: &[usize], rng: &mut ChaCha8Rng) -> Tree<T> {
    let n = x.len();
    let dim = x[0].dim();
    let rows: Vec<usize> = if params.bootstrap {
        (0..n).map(|_| rng.random_range(0..n)).collect()
    } else {
        (0..n).collect()
    };
    let max_features = params
        .max_features
        .unwrap_or_else(|| ((dim as f64).sqrt() as usize).max(1))
        .min(dim.max(1));
    let mut builder = TreeBuilder::new();
    let root = builder.reserve();
    let mut stack = vec![(root, rows, 0usize)];
    while let Some((at, rows, depth)) = stack.pop() {
        let counts = rows.iter().fold([0usize; 2], |mut c, &r| {
            c[y[r]] += 1;
            c
        });
        let leaf = Node::Leaf {
            value: if counts[1] > counts[0] { T::one() } else { T::zero() },
        };
        let stop = counts[0] == 0
            || counts[1] == 0
            || rows.len() < params.min_samples_split
            || params.max_depth.is_some_and(|m| depth >= m);
        if stop {
            builder.set(at, leaf);
            continue;
        }
        let cols = NodeColumns::gather(x, &rows);
        let candidates = draw_features(&cols.nonconstant(), dim, max_features, rng);
        let stat = |r: usize| {
            let mut s = [0usize; 2];
            s[y[r]] += 1;
            s
        };
        let parent_impurity = weighted_gini::<T>(counts);
        let split = cols.best_split(&candidates, stat, counts, |l, r| {
            Some((parent_impurity - weighted_gini::<T>(l) - weighted_gini::<T>(r)) / T::of_usize(rows.len()))
        });
        match split {
            Some(s) if s.gain >= T::of(-1e-9) => {
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

/// `n * gini(counts)`.
fn weighted_gini<T: Scalar>(c: [usize; 2]) -> T {
    let n = c[0] + c[1];
    if n == 0 {
        return T::zero();
    }
    let (a, b, n) = (T::of_usize(c[0]), T::of_usize(c[1]), T::of_usize(n));
    n - (a * a + b * b) / n
}

/// Per-split feature sampling: `max_features` features are drawn without
/// replacement from all `dim`; draws continue past that only while every
/// drawn feature is constant at the node. Only non-constant draws are
/// evaluated, so the count of evaluated features is hypergeometric (at
/// least one), and which ones is uniform over the non-constant set.
fn draw_features(nonconstant: &[usize], dim: usize, max_features: usize, rng: &mut ChaCha8Rng) -> Vec<usize> {
    let k_total = nonconstant.len();
    if k_total == 0 {
        return Vec::new();
    }
    let hits = if max_features >= dim {
        k_total
    } else {
        let h = Hypergeometric::new(dim as u64, k_total as u64, max_features as u64)
            .expect("valid hypergeometric parameters");
        (h.sample(rng) as usize).max(1)
    };
    let mut picked: Vec<usize> = index::sample(rng, k_total, hits)
        .into_iter()
        .map(|i| nonconstant[i])
        .collect();
    picked.sort_unstable();
    picked
}
