//! Semantic novelty of augmented samples (centroid cosine similarity) and
//! 2-D projections for visual inspection.

mod pca;
mod scatter;
mod tsne;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use pca::Pca;
pub use scatter::{emit_scatter, group_color, ScatterGroup};
pub use tsne::{kl_divergence, pairwise_affinities, tsne, Affinities, KlPoint, PointTag, Projection2D, TsneConfig};

use crate::augment::AugmentationBatch;
use crate::corpus::{Document, Source};
use crate::providers::{Embedder, ProviderError};
use crate::scalar::Scalar;

#[derive(Debug, Error)]
pub enum AnalysisError {
    #[error("matrix has no rows")]
    EmptyMatrix,
    #[error("row {row} has dimension {got}, expected {expected}")]
    DimensionMismatch { row: usize, expected: usize, got: usize },
    #[error("{0} ids for {1} rows")]
    IdCount(usize, usize),
    #[error("non-finite value in row {0}")]
    NonFinite(usize),
    #[error("cosine is undefined for a zero-norm vector")]
    ZeroNorm,
    #[error("shape mismatch: {0} vs {1}")]
    ShapeMismatch(usize, usize),
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("all points are identical")]
    Degenerate,
    #[error("non-finite gradient at iteration {iteration}")]
    NonFiniteGradient { iteration: usize },
    #[error(transparent)]
    Provider(#[from] ProviderError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Dense `n x d` matrix with one id per row.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingMatrix<T> {
    rows: Vec<Vec<T>>,
    ids: Vec<String>,
}

impl<T: Scalar> EmbeddingMatrix<T> {
    pub fn new(ids: Vec<String>, rows: Vec<Vec<T>>) -> Result<Self, AnalysisError> {
        if rows.is_empty() {
            return Err(AnalysisError::EmptyMatrix);
        }
        if ids.len() != rows.len() {
            return Err(AnalysisError::IdCount(ids.len(), rows.len()));
        }
        let d = rows[0].len();
        for (i, r) in rows.iter().enumerate() {
            if r.len() != d {
                return Err(AnalysisError::DimensionMismatch {
                    row: i,
                    expected: d,
                    got: r.len(),
                });
            }
            if r.iter().any(|v| !v.is_finite()) {
                return Err(AnalysisError::NonFinite(i));
            }
        }
        Ok(EmbeddingMatrix { rows, ids })
    }

    /// Embeds documents with `embedder`, keyed by document id.
    pub fn embed(docs: &[&Document], embedder: &dyn Embedder) -> Result<Self, AnalysisError> {
        let vectors = embedder.embed_documents(docs)?;
        Self::new(
            docs.iter().map(|d| d.id.clone()).collect(),
            vectors
                .into_iter()
                .map(|v| v.values.into_iter().map(T::of).collect())
                .collect(),
        )
    }

    pub fn n(&self) -> usize {
        self.rows.len()
    }

    pub fn d(&self) -> usize {
        self.rows[0].len()
    }

    pub fn rows(&self) -> &[Vec<T>] {
        &self.rows
    }

    pub fn ids(&self) -> &[String] {
        &self.ids
    }
}

/// Column means.
pub fn centroid<T: Scalar>(m: &EmbeddingMatrix<T>) -> Vec<T> {
    let mut c = vec![T::zero(); m.d()];
    for r in m.rows() {
        for (acc, &v) in c.iter_mut().zip(r) {
            *acc += v;
        }
    }
    let n = T::of_usize(m.n());
    c.iter_mut().for_each(|v| *v /= n);
    c
}

pub fn cosine<T: Scalar>(u: &[T], v: &[T]) -> Result<T, AnalysisError> {
    if u.len() != v.len() {
        return Err(AnalysisError::ShapeMismatch(u.len(), v.len()));
    }
    let dot: T = u.iter().zip(v).map(|(&a, &b)| a * b).sum();
    let nu = u.iter().map(|&a| a * a).sum::<T>().sqrt();
    let nv = v.iter().map(|&b| b * b).sum::<T>().sqrt();
    if nu == T::zero() || nv == T::zero() {
        return Err(AnalysisError::ZeroNorm);
    }
    Ok((dot / (nu * nv)).max(-T::one()).min(T::one()))
}

/// Cosine similarity between the centroid of `reference` and the centroid
/// of `candidates`, both embedded with `embedder`.
pub fn centroid_similarity(
    reference: &[&Document],
    candidates: &[&Document],
    embedder: &dyn Embedder,
) -> Result<f64, AnalysisError> {
    if reference.is_empty() || candidates.is_empty() {
        return Err(AnalysisError::EmptyMatrix);
    }
    let a = EmbeddingMatrix::<f64>::embed(reference, embedder)?;
    let b = EmbeddingMatrix::<f64>::embed(candidates, embedder)?;
    cosine(&centroid(&a), &centroid(&b))
}

/// Similarity of an augmentation batch to the original positive documents.
pub fn semantic_similarity(
    original_positive: &[&Document],
    augmented: &AugmentationBatch,
    embedder: &dyn Embedder,
) -> Result<f64, AnalysisError> {
    let docs: Vec<&Document> = augmented.documents().collect();
    centroid_similarity(original_positive, &docs, embedder)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimilarityRow {
    pub method: String,
    pub similarity: f64,
}

impl SimilarityRow {
    pub fn new(source: Source, similarity: f64) -> Self {
        SimilarityRow {
            method: source.display_name().to_string(),
            similarity,
        }
    }

    /// `Method | 0.1234`
    pub fn render(&self) -> String {
        format!("{} | {:.4}", self.method, self.similarity)
    }
}

/// Table with columns Augmentation Method / Similarity to Original.
pub fn similarity_markdown(rows: &[SimilarityRow]) -> String {
    let mut out = String::from("| Augmentation Method | Similarity to Original |\n|---|---|\n");
    for r in rows {
        out.push_str(&format!("| {} |\n", r.render()));
    }
    out
}
