use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use super::AnalysisError;
use crate::features::SparseVector;
use crate::scalar::Scalar;

const MAX_ITERATIONS: usize = 300;
const CONVERGENCE: f64 = 1e-10;

/// Leading principal components of sparse rows, found one at a time by
/// power iteration on the implicit covariance with Gram-Schmidt deflation.
#[derive(Debug, Clone, PartialEq)]
pub struct Pca<T> {
    pub mean: Vec<T>,
    /// Orthonormal unit vectors, strongest first.
    pub components: Vec<Vec<T>>,
    /// Variance captured by each component.
    pub variances: Vec<T>,
}

fn dot<T: Scalar>(a: &[T], b: &[T]) -> T {
    a.iter().zip(b).map(|(&x, &y)| x * y).sum()
}

fn normalize<T: Scalar>(v: &mut [T]) -> T {
    let n = dot(v, v).sqrt();
    if n > T::zero() {
        v.iter_mut().for_each(|x| *x /= n);
    }
    n
}

impl<T: Scalar> Pca<T> {
    pub fn fit(x: &[SparseVector<T>], k: usize, seed: u64) -> Result<Self, AnalysisError> {
        if x.is_empty() {
            return Err(AnalysisError::EmptyMatrix);
        }
        let dim = x[0].dim();
        let n = T::of_usize(x.len());
        let mut mean = vec![T::zero(); dim];
        for row in x {
            for (j, v) in row.iter() {
                mean[j] += v;
            }
        }
        mean.iter_mut().for_each(|m| *m /= n);
        // Covariance times v without materializing it: Xc^T (Xc v) / n.
        let cov_times = |v: &[T]| -> Vec<T> {
            let shift = dot(&mean, v);
            let u: Vec<T> = x.iter().map(|r| r.dot_dense(v) - shift).collect();
            let total: T = u.iter().copied().sum();
            let mut out: Vec<T> = mean.iter().map(|&m| -m * total).collect();
            for (r, &ui) in x.iter().zip(&u) {
                for (j, v) in r.iter() {
                    out[j] += v * ui;
                }
            }
            out.iter_mut().for_each(|o| *o /= n);
            out
        };
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut components: Vec<Vec<T>> = Vec::new();
        let mut variances = Vec::new();
        let orthogonalize = |v: &mut Vec<T>, basis: &[Vec<T>]| {
            for c in basis {
                let d = dot(v, c);
                v.iter_mut().zip(c).for_each(|(x, &ci)| *x -= d * ci);
            }
        };
        for _ in 0..k.min(dim) {
            let mut v: Vec<T> = (0..dim)
                .map(|_| T::of(StandardNormal.sample(&mut rng)))
                .collect();
            orthogonalize(&mut v, &components);
            normalize(&mut v);
            let mut eigenvalue = T::zero();
            for _ in 0..MAX_ITERATIONS {
                let mut w = cov_times(&v);
                orthogonalize(&mut w, &components);
                orthogonalize(&mut w, &components);
                let norm = normalize(&mut w);
                if norm == T::zero() {
                    break;
                }
                let delta = w.iter().zip(&v).map(|(&a, &b)| (a - b).abs()).fold(T::zero(), T::max);
                v = w;
                eigenvalue = norm;
                if delta < T::of(CONVERGENCE) {
                    break;
                }
            }
            if eigenvalue == T::zero() {
                break;
            }
            variances.push(eigenvalue);
            components.push(v);
        }
        Ok(Pca {
            mean,
            components,
            variances,
        })
    }

    /// Coordinates of `x` in the component basis.
    pub fn transform(&self, x: &SparseVector<T>) -> Vec<T> {
        self.components
            .iter()
            .map(|c| x.dot_dense(c) - dot(&self.mean, c))
            .collect()
    }

    /// Sum of squared residuals after projecting onto the first `m`
    /// components.
    pub fn reconstruction_error(&self, xs: &[SparseVector<T>], m: usize) -> T {
        xs.iter()
            .map(|x| {
                let mut resid: Vec<T> = x.to_dense().iter().zip(&self.mean).map(|(&a, &b)| a - b).collect();
                for c in self.components.iter().take(m) {
                    let d = dot(&resid, c);
                    resid.iter_mut().zip(c).for_each(|(r, &ci)| *r -= d * ci);
                }
                dot(&resid, &resid)
            })
            .sum()
    }
}
