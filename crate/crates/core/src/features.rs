//! Whitespace tokenization and TF-IDF vectorization.
//!
//! IDF uses the smoothed form `ln((1 + n_docs) / (1 + df)) + 1`; term
//! frequency is the raw count. Vectors are L2-normalized by default.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::scalar::Scalar;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum FeatureError {
    #[error("cannot fit TF-IDF on zero documents")]
    NoDocuments,
    #[error("vocabulary is empty after applying min_df = {min_df}")]
    EmptyVocabulary { min_df: usize },
}

pub fn tokenize(norm_text: &str) -> Vec<String> {
    norm_text.split_whitespace().map(str::to_string).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Vocabulary {
    tokens: Vec<String>,
    document_frequency: Vec<usize>,
    n_docs: usize,
    #[serde(skip)]
    index: HashMap<String, usize>,
}

impl Vocabulary {
    fn rebuild_index(&mut self) {
        self.index = self
            .tokens
            .iter()
            .enumerate()
            .map(|(i, t)| (t.clone(), i))
            .collect();
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn index_of(&self, token: &str) -> Option<usize> {
        self.index.get(token).copied()
    }

    pub fn token(&self, index: usize) -> &str {
        &self.tokens[index]
    }

    pub fn tokens(&self) -> &[String] {
        &self.tokens
    }

    pub fn df(&self, index: usize) -> usize {
        self.document_frequency[index]
    }

    pub fn n_docs(&self) -> usize {
        self.n_docs
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TfidfConfig {
    pub min_df: usize,
    pub l2_normalize: bool,
}

impl Default for TfidfConfig {
    fn default() -> Self {
        TfidfConfig {
            min_df: 1,
            l2_normalize: true,
        }
    }
}

/// Sparse vector with entries sorted by strictly increasing index.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct SparseVector<T> {
    indices: Vec<usize>,
    values: Vec<T>,
    dim: usize,
}

impl<T: Scalar> SparseVector<T> {
    pub fn zeros(dim: usize) -> Self {
        SparseVector {
            indices: Vec::new(),
            values: Vec::new(),
            dim,
        }
    }

    /// Builds from arbitrary-order pairs; duplicate indices are summed and
    /// exact zeros dropped.
    pub fn from_pairs(dim: usize, pairs: impl IntoIterator<Item = (usize, T)>) -> Self {
        let mut pairs: Vec<(usize, T)> = pairs.into_iter().collect();
        pairs.sort_by_key(|p| p.0);
        let mut indices: Vec<usize> = Vec::with_capacity(pairs.len());
        let mut values: Vec<T> = Vec::with_capacity(pairs.len());
        for (i, v) in pairs {
            assert!(i < dim, "index {i} out of bounds for dimension {dim}");
            if indices.last() == Some(&i) {
                *values.last_mut().expect("parallel vectors") += v;
            } else {
                indices.push(i);
                values.push(v);
            }
        }
        let (indices, values) = indices
            .into_iter()
            .zip(values)
            .filter(|(_, v)| !v.is_zero())
            .unzip();
        SparseVector { indices, values, dim }
    }

    pub fn from_dense(values: &[T]) -> Self {
        Self::from_pairs(values.len(), values.iter().copied().enumerate())
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn nnz(&self) -> usize {
        self.indices.len()
    }

    pub fn indices(&self) -> &[usize] {
        &self.indices
    }

    pub fn values(&self) -> &[T] {
        &self.values
    }

    pub fn iter(&self) -> impl Iterator<Item = (usize, T)> + '_ {
        self.indices.iter().copied().zip(self.values.iter().copied())
    }

    pub fn get(&self, index: usize) -> T {
        match self.indices.binary_search(&index) {
            Ok(p) => self.values[p],
            Err(_) => T::zero(),
        }
    }

    pub fn dot_dense(&self, dense: &[T]) -> T {
        self.iter().map(|(i, v)| v * dense[i]).sum()
    }

    pub fn norm(&self) -> T {
        self.values.iter().map(|v| *v * *v).sum::<T>().sqrt()
    }

    pub fn to_dense(&self) -> Vec<T> {
        let mut d = vec![T::zero(); self.dim];
        for (i, v) in self.iter() {
            d[i] = v;
        }
        d
    }
}

/// Fitted vocabulary plus IDF weights.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct TfidfModel<T> {
    vocabulary: Vocabulary,
    idf: Vec<T>,
    config: TfidfConfig,
}

impl<T: Scalar> TfidfModel<T> {
    /// Fits on training documents only. Vocabulary order is first occurrence.
    pub fn fit<S: AsRef<str>>(docs: &[Vec<S>], config: TfidfConfig) -> Result<Self, FeatureError> {
        if docs.is_empty() {
            return Err(FeatureError::NoDocuments);
        }
        let mut order: Vec<&str> = Vec::new();
        let mut df: HashMap<&str, usize> = HashMap::new();
        for doc in docs {
            let mut seen_here: Vec<&str> = doc.iter().map(AsRef::as_ref).collect();
            seen_here.sort_unstable();
            seen_here.dedup();
            for t in seen_here {
                *df.entry(t).or_insert(0) += 1;
            }
            for t in doc {
                let t = t.as_ref();
                if df.get(t) == Some(&1) && !order.contains(&t) {
                    order.push(t);
                }
            }
        }
        let n_docs = docs.len();
        let kept: Vec<&str> = order.into_iter().filter(|t| df[t] >= config.min_df).collect();
        if kept.is_empty() {
            return Err(FeatureError::EmptyVocabulary { min_df: config.min_df });
        }
        let n = T::of_usize(n_docs);
        let idf = kept
            .iter()
            .map(|t| ((T::one() + n) / (T::one() + T::of_usize(df[t]))).ln() + T::one())
            .collect();
        let mut vocabulary = Vocabulary {
            tokens: kept.iter().map(|t| t.to_string()).collect(),
            document_frequency: kept.iter().map(|t| df[t]).collect(),
            n_docs,
            index: HashMap::new(),
        };
        vocabulary.rebuild_index();
        Ok(TfidfModel {
            vocabulary,
            idf,
            config,
        })
    }

    pub fn transform<S: AsRef<str>>(&self, doc: &[S]) -> SparseVector<T> {
        let mut counts: HashMap<usize, usize> = HashMap::new();
        for t in doc {
            if let Some(i) = self.vocabulary.index_of(t.as_ref()) {
                *counts.entry(i).or_insert(0) += 1;
            }
        }
        let mut v = SparseVector::from_pairs(
            self.dim(),
            counts.into_iter().map(|(i, c)| (i, T::of_usize(c) * self.idf[i])),
        );
        if self.config.l2_normalize {
            let norm = v.norm();
            if norm > T::zero() {
                for x in &mut v.values {
                    *x /= norm;
                }
            }
        }
        v
    }

    pub fn transform_all<S: AsRef<str>>(&self, docs: &[Vec<S>]) -> Vec<SparseVector<T>> {
        docs.iter().map(|d| self.transform(d)).collect()
    }

    pub fn dim(&self) -> usize {
        self.vocabulary.len()
    }

    pub fn vocabulary(&self) -> &Vocabulary {
        &self.vocabulary
    }

    pub fn idf(&self) -> &[T] {
        &self.idf
    }

    pub fn idf_of(&self, token: &str) -> Option<T> {
        self.vocabulary.index_of(token).map(|i| self.idf[i])
    }

    pub fn config(&self) -> TfidfConfig {
        self.config
    }

    /// Audit export: `{vocabulary, idf, config}`.
    pub fn to_json(&self) -> serde_json::Value {
        serde_json::json!({
            "vocabulary": self.vocabulary.tokens,
            "document_frequency": self.vocabulary.document_frequency,
            "n_docs": self.vocabulary.n_docs,
            "idf": self.idf.iter().map(|x| x.as_f64()).collect::<Vec<_>>(),
            "config": self.config,
        })
    }

    pub fn from_json(value: &serde_json::Value) -> Result<Self, serde_json::Error> {
        #[derive(Deserialize)]
        struct Export {
            vocabulary: Vec<String>,
            document_frequency: Vec<usize>,
            n_docs: usize,
            idf: Vec<f64>,
            config: TfidfConfig,
        }
        let e: Export = serde_json::from_value(value.clone())?;
        let mut vocabulary = Vocabulary {
            tokens: e.vocabulary,
            document_frequency: e.document_frequency,
            n_docs: e.n_docs,
            index: HashMap::new(),
        };
        vocabulary.rebuild_index();
        Ok(TfidfModel {
            vocabulary,
            idf: e.idf.into_iter().map(T::of).collect(),
            config: e.config,
        })
    }
}
