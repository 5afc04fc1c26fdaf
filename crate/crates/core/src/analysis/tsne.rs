//! Exact t-SNE: O(n^2) affinities and gradient per iteration.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::AnalysisError;
use crate::corpus::{Label, Source};
use crate::scalar::Scalar;

const MAX_SEARCH_STEPS: usize = 64;
const ENTROPY_TOL: f64 = 1e-5;
const Q_FLOOR: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TsneConfig {
    pub perplexity: f64,
    pub iterations: usize,
    pub learning_rate: f64,
    pub initial_momentum: f64,
    pub final_momentum: f64,
    /// Iteration at which momentum switches to `final_momentum`.
    pub momentum_switch: usize,
    pub early_exaggeration: f64,
    pub exaggeration_iterations: usize,
    pub init_std: f64,
    /// Lower bound of the per-coordinate adaptive step gains.
    pub min_gain: f64,
    /// KL is recorded every this many iterations and at the end.
    pub log_every: usize,
}

impl Default for TsneConfig {
    fn default() -> Self {
        TsneConfig {
            perplexity: 30.0,
            iterations: 1000,
            learning_rate: 200.0,
            initial_momentum: 0.5,
            final_momentum: 0.8,
            momentum_switch: 250,
            early_exaggeration: 12.0,
            exaggeration_iterations: 250,
            init_std: 1e-4,
            min_gain: 0.01,
            log_every: 50,
        }
    }
}

impl TsneConfig {
    pub fn validate(&self, n: usize) -> Result<(), AnalysisError> {
        let bad = |m: String| Err(AnalysisError::InvalidConfig(m));
        if !(self.perplexity > 0.0 && self.learning_rate > 0.0 && self.init_std > 0.0) {
            return bad("perplexity, learning_rate and init_std must be positive".into());
        }
        if self.early_exaggeration <= 0.0 || self.log_every == 0 {
            return bad("early_exaggeration and log_every must be positive".into());
        }
        if 3.0 * self.perplexity <= 1.0 || 3.0 * self.perplexity >= n as f64 {
            return bad(format!(
                "need 1 < 3 * perplexity < n; perplexity = {}, n = {n}",
                self.perplexity
            ));
        }
        Ok(())
    }
}

/// Symmetric joint affinities, row-major `n x n`.
#[derive(Debug, Clone, PartialEq)]
pub struct Affinities<T> {
    pub n: usize,
    pub p: Vec<T>,
    /// Shannon entropy in bits of each conditional row after calibration.
    pub entropies: Vec<T>,
    /// Precision `1 / (2 sigma^2)` found for each row.
    pub betas: Vec<T>,
}

fn squared_distances<T: Scalar>(x: &[Vec<T>]) -> Vec<Vec<T>> {
    x.par_iter()
        .map(|a| {
            x.iter()
                .map(|b| a.iter().zip(b).map(|(&u, &v)| (u - v) * (u - v)).sum())
                .collect()
        })
        .collect()
}

/// Conditional row `p_{j|i}` for precision `beta` plus its entropy in nats.
fn conditional_row<T: Scalar>(d: &[T], i: usize, beta: T, shift: T) -> (Vec<T>, T) {
    let mut p: Vec<T> = d
        .iter()
        .enumerate()
        .map(|(j, &dj)| if j == i { T::zero() } else { (-beta * (dj - shift)).exp() })
        .collect();
    let z: T = p.iter().copied().sum();
    let weighted: T = p
        .iter()
        .zip(d)
        .enumerate()
        .filter(|(j, _)| *j != i)
        .map(|(_, (&pj, &dj))| pj * (dj - shift))
        .sum();
    let h = z.ln() + beta * weighted / z;
    p.iter_mut().for_each(|v| *v /= z);
    (p, h)
}

/// Calibrates one bandwidth per point by bisection so each conditional
/// distribution has entropy `log2(perplexity)` bits, then symmetrizes:
/// `p_ij = (p_{j|i} + p_{i|j}) / 2n`.
pub fn pairwise_affinities<T: Scalar>(x: &[Vec<T>], perplexity: f64) -> Result<Affinities<T>, AnalysisError> {
    let n = x.len();
    if n == 0 {
        return Err(AnalysisError::EmptyMatrix);
    }
    if 3.0 * perplexity >= n as f64 {
        return Err(AnalysisError::InvalidConfig(format!(
            "3 * perplexity ({}) must be below n ({n})",
            3.0 * perplexity
        )));
    }
    let d = squared_distances(x);
    if d.iter().all(|row| row.iter().all(|v| *v == T::zero())) {
        return Err(AnalysisError::Degenerate);
    }
    let ln2 = T::of(std::f64::consts::LN_2);
    let target = T::of(perplexity.log2());
    let tol = T::of(ENTROPY_TOL);
    let rows: Vec<(Vec<T>, T, T)> = (0..n)
        .into_par_iter()
        .map(|i| {
            let row = &d[i];
            let others = || row.iter().enumerate().filter(|(j, _)| *j != i).map(|(_, &v)| v);
            let shift = others().fold(T::infinity(), T::min);
            let mean = others().sum::<T>() / T::of_usize(n - 1);
            let mut beta = if mean > shift { T::one() / (mean - shift) } else { T::one() };
            let (mut lo, mut hi) = (T::zero(), T::infinity());
            let (mut p, mut h) = conditional_row(row, i, beta, shift);
            for _ in 0..MAX_SEARCH_STEPS {
                let bits = h / ln2;
                if (bits - target).abs() < tol {
                    break;
                }
                if bits > target {
                    lo = beta;
                    beta = if hi.is_infinite() { beta * T::of(2.0) } else { (beta + hi) / T::of(2.0) };
                } else {
                    hi = beta;
                    beta = (beta + lo) / T::of(2.0);
                }
                (p, h) = conditional_row(row, i, beta, shift);
            }
            (p, h / ln2, beta)
        })
        .collect();
    let two_n = T::of_usize(2 * n);
    let mut p = vec![T::zero(); n * n];
    for i in 0..n {
        for j in 0..n {
            if i != j {
                p[i * n + j] = (rows[i].0[j] + rows[j].0[i]) / two_n;
            }
        }
    }
    Ok(Affinities {
        n,
        p,
        entropies: rows.iter().map(|r| r.1).collect(),
        betas: rows.iter().map(|r| r.2).collect(),
    })
}

/// `sum p log(p / max(q, 1e-12))` over entries with `p > 0`.
pub fn kl_divergence<T: Scalar>(p: &[T], q: &[T]) -> Result<T, AnalysisError> {
    if p.len() != q.len() {
        return Err(AnalysisError::ShapeMismatch(p.len(), q.len()));
    }
    let floor = T::of(Q_FLOOR);
    Ok(p.iter()
        .zip(q)
        .filter(|(pi, _)| **pi > T::zero())
        .map(|(&pi, &qi)| pi * (pi / qi.max(floor)).ln())
        .sum())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KlPoint {
    pub iteration: usize,
    pub kl: f64,
}

/// Source and label of a projected point, used for grouping and colors.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct PointTag {
    pub source: Source,
    pub label: Label,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Projection2D {
    pub coords: Vec<[f64; 2]>,
    pub ids: Vec<String>,
    pub tags: Vec<PointTag>,
    pub final_kl: f64,
    pub kl_history: Vec<KlPoint>,
}

impl Projection2D {
    pub fn n(&self) -> usize {
        self.coords.len()
    }

    /// First KL recorded once early exaggeration has ended.
    pub fn kl_after_exaggeration(&self, config: &TsneConfig) -> Option<f64> {
        self.kl_history
            .iter()
            .find(|k| k.iteration >= config.exaggeration_iterations)
            .map(|k| k.kl)
    }
}

/// Student-t kernel numerators and their sum for the current layout.
fn kernel<T: Scalar>(y: &[[T; 2]]) -> (Vec<T>, T) {
    let n = y.len();
    let num: Vec<T> = (0..n)
        .into_par_iter()
        .flat_map_iter(|i| {
            (0..n).map(move |j| {
                if i == j {
                    T::zero()
                } else {
                    let dx = y[i][0] - y[j][0];
                    let dy = y[i][1] - y[j][1];
                    T::one() / (T::one() + dx * dx + dy * dy)
                }
            })
        })
        .collect();
    let row_sums: Vec<T> = num.par_chunks(n).map(|r| r.iter().copied().sum()).collect();
    let z = row_sums.into_iter().sum();
    (num, z)
}

fn current_kl<T: Scalar>(p: &[T], y: &[[T; 2]]) -> Result<T, AnalysisError> {
    let (num, z) = kernel(y);
    let q: Vec<T> = num.iter().map(|&v| v / z).collect();
    kl_divergence(p, &q)
}

/// Embeds `x` in two dimensions. Row ids and tags are attached by the
/// caller via the returned projection's fields. Deterministic for a seed.
pub fn tsne<T: Scalar>(
    x: &[Vec<T>],
    ids: Vec<String>,
    tags: Vec<PointTag>,
    config: &TsneConfig,
    seed: u64,
) -> Result<Projection2D, AnalysisError> {
    let n = x.len();
    config.validate(n)?;
    if ids.len() != n || tags.len() != n {
        return Err(AnalysisError::IdCount(ids.len().min(tags.len()), n));
    }
    let aff = pairwise_affinities(x, config.perplexity)?;
    let p = aff.p;

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let normal = Normal::new(0.0, config.init_std).expect("positive std");
    let mut y: Vec<[T; 2]> = (0..n)
        .map(|_| [T::of(normal.sample(&mut rng)), T::of(normal.sample(&mut rng))])
        .collect();
    let mut update = vec![[T::zero(); 2]; n];
    let mut gains = vec![[T::one(); 2]; n];
    let lr = T::of(config.learning_rate);
    let min_gain = T::of(config.min_gain);
    let four = T::of(4.0);
    let mut kl_history = Vec::new();

    for it in 0..config.iterations {
        let exaggeration = if it < config.exaggeration_iterations {
            T::of(config.early_exaggeration)
        } else {
            T::one()
        };
        let momentum = T::of(if it < config.momentum_switch {
            config.initial_momentum
        } else {
            config.final_momentum
        });
        let (num, z) = kernel(&y);
        let grad: Vec<[T; 2]> = (0..n)
            .into_par_iter()
            .map(|i| {
                let mut g = [T::zero(); 2];
                for j in 0..n {
                    if i == j {
                        continue;
                    }
                    let nij = num[i * n + j];
                    let w = (exaggeration * p[i * n + j] - nij / z) * nij;
                    g[0] += w * (y[i][0] - y[j][0]);
                    g[1] += w * (y[i][1] - y[j][1]);
                }
                [four * g[0], four * g[1]]
            })
            .collect();
        if grad.iter().any(|g| !g[0].is_finite() || !g[1].is_finite()) {
            return Err(AnalysisError::NonFiniteGradient { iteration: it });
        }
        for i in 0..n {
            for c in 0..2 {
                gains[i][c] = if update[i][c] * grad[i][c] < T::zero() {
                    gains[i][c] + T::of(0.2)
                } else {
                    (gains[i][c] * T::of(0.8)).max(min_gain)
                };
                update[i][c] = momentum * update[i][c] - lr * gains[i][c] * grad[i][c];
                y[i][c] += update[i][c];
            }
        }
        if (it + 1) % config.log_every == 0 || it + 1 == config.iterations {
            let kl = current_kl(&p, &y)?.as_f64();
            log::debug!("t-SNE iteration {}: KL = {kl:.6}", it + 1);
            kl_history.push(KlPoint { iteration: it + 1, kl });
        }
    }
    let final_kl = match kl_history.last() {
        Some(k) => k.kl,
        None => current_kl(&p, &y)?.as_f64(),
    };
    Ok(Projection2D {
        coords: y.iter().map(|r| [r[0].as_f64(), r[1].as_f64()]).collect(),
        ids,
        tags,
        final_kl,
        kl_history,
    })
}
