//! Clients for text generation, translation and embedding services.
//!
//! Every provider is a trait object so the augmentation and analysis code
//! never knows whether it is talking to a live endpoint, a replay cache, or
//! one of the seeded mocks in [`mock`].

pub mod cache;
pub mod http;
pub mod mock;
pub mod precomputed;

use std::fmt;
use std::sync::Mutex;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::corpus::Document;

pub use cache::{CacheMode, ResponseCache};
pub use http::{HttpChat, HttpConfig, HttpEmbedder, HttpTranslator, RetryPolicy};
pub use mock::{MockChat, MockEmbedder, MockTranslator};
pub use precomputed::PrecomputedEmbeddings;

#[derive(Debug, Error)]
pub enum ProviderError {
    #[error("invalid request: {0}")]
    Precondition(String),
    #[error("transport failure after {attempts} attempt(s): {message}")]
    Transport { attempts: usize, message: String },
    #[error("endpoint returned HTTP {status}: {body}")]
    Status { status: u16, body: String },
    #[error("rate limited after {attempts} attempt(s)")]
    RateLimited { attempts: usize },
    #[error("malformed response: {0}")]
    Malformed(String),
    #[error("embedding dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("no embedding for document {0:?}")]
    MissingEmbedding(String),
    #[error("replay cache has no entry for request {0}")]
    CacheMiss(String),
    #[error("cache I/O: {0}")]
    Cache(#[from] std::io::Error),
}

/// Sampling parameters for chat generation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GenerationParams {
    pub temperature: f64,
    pub top_p: f64,
    pub max_tokens: u32,
    pub model_name: String,
}

impl Default for GenerationParams {
    fn default() -> Self {
        GenerationParams {
            temperature: 0.25,
            top_p: 0.4,
            max_tokens: 256,
            model_name: "gpt-3.5-turbo".to_string(),
        }
    }
}

impl GenerationParams {
    pub fn validate(&self) -> Result<(), ProviderError> {
        if !(0.0..=2.0).contains(&self.temperature) {
            return Err(ProviderError::Precondition(format!(
                "temperature {} outside [0, 2]",
                self.temperature
            )));
        }
        if !(self.top_p > 0.0 && self.top_p <= 1.0) {
            return Err(ProviderError::Precondition(format!("top_p {} outside (0, 1]", self.top_p)));
        }
        if self.max_tokens == 0 {
            return Err(ProviderError::Precondition("max_tokens must be >= 1".into()));
        }
        Ok(())
    }

    /// Hex SHA-256 of the canonical JSON encoding.
    pub fn digest(&self) -> String {
        sha256_hex(&serde_json::to_vec(self).expect("params serialize"))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RequestKind {
    Chat,
    Translate,
    Embed,
}

/// A fully serialized request. The digest covers endpoint and payload, so
/// any parameter change produces a different cache key.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ProviderRequest {
    pub kind: RequestKind,
    pub endpoint: String,
    pub payload: Vec<u8>,
    pub digest: String,
}

impl ProviderRequest {
    pub fn new(kind: RequestKind, endpoint: &str, payload: &impl Serialize) -> Self {
        let payload = serde_json::to_vec(payload).expect("request payload serializes");
        let mut h = Sha256::new();
        h.update(endpoint.as_bytes());
        h.update([0u8]);
        h.update(&payload);
        ProviderRequest {
            kind,
            endpoint: endpoint.to_string(),
            payload,
            digest: hex::encode(h.finalize()),
        }
    }
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// Derives a 64-bit RNG seed from a seed and arbitrary byte parts.
pub(crate) fn derive_seed(seed: u64, parts: &[&[u8]]) -> u64 {
    let mut h = Sha256::new();
    h.update(seed.to_le_bytes());
    for p in parts {
        h.update((p.len() as u64).to_le_bytes());
        h.update(p);
    }
    let out = h.finalize();
    u64::from_le_bytes(out[..8].try_into().expect("8 bytes"))
}

pub trait ChatProvider: Send + Sync {
    fn chat_generate(&self, prompt: &str, params: &GenerationParams) -> Result<String, ProviderError>;

    /// Short identifier recorded in batch provenance.
    fn fingerprint(&self) -> String;
}

pub trait Translator: Send + Sync {
    fn translate(&self, text: &str, source_lang: &str, target_lang: &str) -> Result<String, ProviderError>;

    fn fingerprint(&self) -> String;
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct EmbeddingVector {
    pub values: Vec<f64>,
}

impl EmbeddingVector {
    pub fn new(values: Vec<f64>) -> Result<Self, ProviderError> {
        if let Some(bad) = values.iter().find(|v| !v.is_finite()) {
            return Err(ProviderError::Malformed(format!("non-finite embedding entry {bad}")));
        }
        Ok(EmbeddingVector { values })
    }

    pub fn dim(&self) -> usize {
        self.values.len()
    }
}

pub trait Embedder: Send + Sync {
    fn embed(&self, texts: &[&str]) -> Result<Vec<EmbeddingVector>, ProviderError>;

    /// Embeds documents; the default embeds their raw text.
    fn embed_documents(&self, docs: &[&Document]) -> Result<Vec<EmbeddingVector>, ProviderError> {
        let texts: Vec<&str> = docs.iter().map(|d| d.raw_text.as_str()).collect();
        self.embed(&texts)
    }

    fn fingerprint(&self) -> String;
}

pub(crate) fn check_embed_input(texts: &[&str]) -> Result<(), ProviderError> {
    if texts.is_empty() {
        return Err(ProviderError::Precondition("embed needs at least one text".into()));
    }
    if let Some(i) = texts.iter().position(|t| t.trim().is_empty()) {
        return Err(ProviderError::Precondition(format!("text #{i} is empty")));
    }
    Ok(())
}

pub(crate) fn check_translate_input(text: &str, source: &str, target: &str) -> Result<(), ProviderError> {
    if text.trim().is_empty() {
        return Err(ProviderError::Precondition("cannot translate empty text".into()));
    }
    if source == target {
        return Err(ProviderError::Precondition(format!(
            "source and target language are both {source:?}"
        )));
    }
    Ok(())
}

/// Pins the embedding dimension for one provider session.
#[derive(Debug, Default)]
pub(crate) struct DimensionGuard(Mutex<Option<usize>>);

impl DimensionGuard {
    pub(crate) fn check(&self, vectors: &[EmbeddingVector]) -> Result<(), ProviderError> {
        let mut dim = self.0.lock().expect("dimension guard poisoned");
        for v in vectors {
            match *dim {
                None => *dim = Some(v.dim()),
                Some(expected) if expected != v.dim() => {
                    return Err(ProviderError::DimensionMismatch { expected, got: v.dim() })
                }
                _ => {}
            }
        }
        Ok(())
    }
}

impl fmt::Display for RequestKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            RequestKind::Chat => "chat",
            RequestKind::Translate => "translate",
            RequestKind::Embed => "embed",
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::HashSet;

    #[test]
    fn params_defaults_and_validation() {
        let p = GenerationParams::default();
        assert_eq!(p.temperature, 0.25);
        assert_eq!(p.top_p, 0.4);
        p.validate().unwrap();
        assert!(GenerationParams { top_p: 0.0, ..p.clone() }.validate().is_err());
        assert!(GenerationParams { temperature: 2.5, ..p.clone() }.validate().is_err());
        assert!(GenerationParams { max_tokens: 0, ..p }.validate().is_err());
    }

    #[test]
    fn digest_is_pure_and_distinguishes_payloads() {
        let a = ProviderRequest::new(RequestKind::Chat, "http://x", &serde_json::json!({"p": 1}));
        let b = ProviderRequest::new(RequestKind::Chat, "http://x", &serde_json::json!({"p": 1}));
        assert_eq!(a.digest, b.digest);
        let c = ProviderRequest::new(RequestKind::Chat, "http://y", &serde_json::json!({"p": 1}));
        assert_ne!(a.digest, c.digest);

        let digests: HashSet<String> = (0..2000)
            .map(|i| ProviderRequest::new(RequestKind::Embed, "e", &serde_json::json!({"texts": [format!("t{i}")]})).digest)
            .collect();
        assert_eq!(digests.len(), 2000);
    }

    #[test]
    fn dimension_guard_rejects_mismatch() {
        let g = DimensionGuard::default();
        g.check(&[EmbeddingVector::new(vec![0.0; 3]).unwrap()]).unwrap();
        assert!(matches!(
            g.check(&[EmbeddingVector::new(vec![0.0; 4]).unwrap()]),
            Err(ProviderError::DimensionMismatch { expected: 3, got: 4 })
        ));
    }

    #[test]
    fn embedding_vector_rejects_nan() {
        assert!(EmbeddingVector::new(vec![1.0, f64::NAN]).is_err());
    }
}
