use std::collections::HashMap;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{Embedder, EmbeddingVector, ProviderError};
use crate::corpus::Document;

#[derive(Debug, Serialize, Deserialize)]
struct Row {
    id: String,
    vector: Vec<f64>,
}

/// Embeddings supplied ahead of time as JSONL rows `{id, vector}`, looked up
/// by document id.
#[derive(Debug, Clone, Default)]
pub struct PrecomputedEmbeddings {
    vectors: HashMap<String, EmbeddingVector>,
    dim: usize,
    source: String,
}

impl PrecomputedEmbeddings {
    pub fn load(path: &Path) -> Result<Self, ProviderError> {
        let reader = BufReader::new(File::open(path)?);
        let mut out = PrecomputedEmbeddings {
            source: path.display().to_string(),
            ..Default::default()
        };
        for (i, line) in reader.lines().enumerate() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let row: Row = serde_json::from_str(&line)
                .map_err(|e| ProviderError::Malformed(format!("{}:{}: {e}", path.display(), i + 1)))?;
            out.insert(row.id, EmbeddingVector::new(row.vector)?)?;
        }
        Ok(out)
    }

    pub fn from_pairs(pairs: impl IntoIterator<Item = (String, Vec<f64>)>) -> Result<Self, ProviderError> {
        let mut out = PrecomputedEmbeddings {
            source: "in-memory".into(),
            ..Default::default()
        };
        for (id, v) in pairs {
            out.insert(id, EmbeddingVector::new(v)?)?;
        }
        Ok(out)
    }

    fn insert(&mut self, id: String, v: EmbeddingVector) -> Result<(), ProviderError> {
        if self.vectors.is_empty() {
            self.dim = v.dim();
        } else if v.dim() != self.dim {
            return Err(ProviderError::DimensionMismatch {
                expected: self.dim,
                got: v.dim(),
            });
        }
        if self.vectors.insert(id.clone(), v).is_some() {
            return Err(ProviderError::Malformed(format!("duplicate embedding id {id:?}")));
        }
        Ok(())
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.vectors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vectors.is_empty()
    }
}

/// Writes `{id, vector}` rows.
pub fn write_embeddings<'a>(
    path: &Path,
    rows: impl IntoIterator<Item = (&'a str, &'a EmbeddingVector)>,
) -> Result<(), ProviderError> {
    let mut w = BufWriter::new(File::create(path)?);
    for (id, v) in rows {
        serde_json::to_writer(
            &mut w,
            &Row {
                id: id.to_string(),
                vector: v.values.clone(),
            },
        )
        .map_err(std::io::Error::from)?;
        w.write_all(b"\n")?;
    }
    w.flush()?;
    Ok(())
}

impl Embedder for PrecomputedEmbeddings {
    fn embed(&self, _texts: &[&str]) -> Result<Vec<EmbeddingVector>, ProviderError> {
        Err(ProviderError::Precondition(
            "precomputed embeddings are keyed by document id; use embed_documents".into(),
        ))
    }

    fn embed_documents(&self, docs: &[&Document]) -> Result<Vec<EmbeddingVector>, ProviderError> {
        if docs.is_empty() {
            return Err(ProviderError::Precondition("embed needs at least one document".into()));
        }
        docs.iter()
            .map(|d| {
                self.vectors
                    .get(&d.id)
                    .cloned()
                    .ok_or_else(|| ProviderError::MissingEmbedding(d.id.clone()))
            })
            .collect()
    }

    fn fingerprint(&self) -> String {
        format!("precomputed:{}", self.source)
    }
}
