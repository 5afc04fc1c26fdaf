//! Deterministic offline providers. Each is a pure function of its seed and
//! input, so runs that use them are reproducible bit for bit.

use std::collections::HashMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{
    check_embed_input, check_translate_input, derive_seed, ChatProvider, Embedder, EmbeddingVector,
    GenerationParams, ProviderError, Translator,
};
use crate::augment::prompt::{NEGATIVE_HEADER, POSITIVE_HEADER, INSTRUCTION};

/// Seeded template filler standing in for a chat model.
///
/// It reads the positive-class examples out of the prompt and samples a new
/// "tweet" from their pooled tokens. Prompts without a recognizable
/// positive block fall back to every word in the prompt.
#[derive(Debug, Clone)]
pub struct MockChat {
    pub seed: u64,
    pub min_tokens: usize,
    pub max_tokens: usize,
}

impl MockChat {
    pub fn new(seed: u64) -> Self {
        MockChat {
            seed,
            min_tokens: 6,
            max_tokens: 14,
        }
    }
}

/// Example lines of the positive block, with their `N. ` numbering removed.
pub(crate) fn positive_examples(prompt: &str) -> Option<Vec<&str>> {
    let start = prompt.find(POSITIVE_HEADER)? + POSITIVE_HEADER.len();
    let rest = &prompt[start..];
    let end = [rest.find(INSTRUCTION), rest.find(NEGATIVE_HEADER)]
        .into_iter()
        .flatten()
        .min()
        .unwrap_or(rest.len());
    Some(
        rest[..end]
            .lines()
            .map(|l| {
                let t = l.trim();
                match t.split_once(". ") {
                    Some((n, body)) if !n.is_empty() && n.chars().all(|c| c.is_ascii_digit()) => body,
                    _ => t,
                }
            })
            .filter(|l| !l.is_empty())
            .collect(),
    )
}

impl ChatProvider for MockChat {
    fn chat_generate(&self, prompt: &str, params: &GenerationParams) -> Result<String, ProviderError> {
        if prompt.trim().is_empty() {
            return Err(ProviderError::Precondition("prompt is empty".into()));
        }
        params.validate()?;
        let pool: Vec<&str> = match positive_examples(prompt) {
            Some(lines) if !lines.is_empty() => lines.iter().flat_map(|l| l.split_whitespace()).collect(),
            _ => prompt.split_whitespace().collect(),
        };
        let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(self.seed, &[prompt.as_bytes()]));
        let len = rng.random_range(self.min_tokens..=self.max_tokens.max(self.min_tokens));
        let body = (0..len)
            .map(|_| pool[rng.random_range(0..pool.len())])
            .collect::<Vec<_>>()
            .join(" ");
        // Occasionally mimic a model that echoes the cue and quotes its answer.
        if rng.random_bool(0.1) {
            Ok(format!("Generated tweet: \"{body}\""))
        } else {
            Ok(body)
        }
    }

    fn fingerprint(&self) -> String {
        format!("mock-chat:seed={}", self.seed)
    }
}

/// Word-substitution translator with optional seeded perturbation.
///
/// With no tables and no perturbation it is the identity. Tables map whole
/// whitespace tokens for one (source, target) direction; perturbation makes
/// one seeded edit per call (adjacent swap, drop, or duplicate).
#[derive(Debug, Clone, Default)]
pub struct MockTranslator {
    pub seed: u64,
    pub perturb: bool,
    tables: HashMap<(String, String), HashMap<String, String>>,
}

impl MockTranslator {
    pub fn identity() -> Self {
        MockTranslator::default()
    }

    pub fn perturbing(seed: u64) -> Self {
        MockTranslator {
            seed,
            perturb: true,
            tables: HashMap::new(),
        }
    }

    pub fn with_table<I, A, B>(mut self, source: &str, target: &str, pairs: I) -> Self
    where
        I: IntoIterator<Item = (A, B)>,
        A: Into<String>,
        B: Into<String>,
    {
        let table = self.tables.entry((source.to_string(), target.to_string())).or_default();
        table.extend(pairs.into_iter().map(|(a, b)| (a.into(), b.into())));
        self
    }
}

impl Translator for MockTranslator {
    fn translate(&self, text: &str, source_lang: &str, target_lang: &str) -> Result<String, ProviderError> {
        check_translate_input(text, source_lang, target_lang)?;
        let table = self.tables.get(&(source_lang.to_string(), target_lang.to_string()));
        if table.is_none() && !self.perturb {
            return Ok(text.to_string());
        }
        let mut tokens: Vec<String> = text
            .split_whitespace()
            .map(|t| match table.and_then(|m| m.get(t)) {
                Some(r) => r.clone(),
                None => t.to_string(),
            })
            .collect();
        if self.perturb {
            let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(
                self.seed,
                &[text.as_bytes(), source_lang.as_bytes(), target_lang.as_bytes()],
            ));
            let n = tokens.len();
            let swappable: Vec<usize> = (0..n.saturating_sub(1)).filter(|&i| tokens[i] != tokens[i + 1]).collect();
            match rng.random_range(0..3) {
                0 if !swappable.is_empty() => {
                    let i = swappable[rng.random_range(0..swappable.len())];
                    tokens.swap(i, i + 1);
                }
                1 if n > 3 => {
                    tokens.remove(rng.random_range(0..n));
                }
                _ => {
                    let i = rng.random_range(0..n);
                    let t = tokens[i].clone();
                    tokens.insert(i, t);
                }
            }
        }
        Ok(tokens.join(" "))
    }

    fn fingerprint(&self) -> String {
        format!(
            "mock-translate:seed={}:perturb={}:tables={}",
            self.seed,
            self.perturb,
            self.tables.len()
        )
    }
}

/// 64-bit FNV-1a.
pub fn fnv1a64(bytes: &[u8]) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in bytes {
        h ^= u64::from(*b);
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    h
}

/// Hashed bag-of-words embedder with mean pooling.
///
/// Each lowercased whitespace token `t` contributes `±1` at index
/// `fnv1a64(t) mod dim`, negative when the hash's top bit is set; the sum is
/// divided by the token count.
#[derive(Debug, Clone)]
pub struct MockEmbedder {
    pub dim: usize,
}

impl Default for MockEmbedder {
    fn default() -> Self {
        MockEmbedder { dim: 16 }
    }
}

impl MockEmbedder {
    pub fn new(dim: usize) -> Self {
        MockEmbedder { dim: dim.max(1) }
    }

    fn embed_one(&self, text: &str) -> Vec<f64> {
        let mut v = vec![0.0; self.dim];
        let mut n = 0usize;
        for tok in text.split_whitespace() {
            let h = fnv1a64(tok.to_lowercase().as_bytes());
            let sign = if h >> 63 == 1 { -1.0 } else { 1.0 };
            v[(h % self.dim as u64) as usize] += sign;
            n += 1;
        }
        for x in &mut v {
            *x /= n as f64;
        }
        v
    }
}

impl Embedder for MockEmbedder {
    fn embed(&self, texts: &[&str]) -> Result<Vec<EmbeddingVector>, ProviderError> {
        check_embed_input(texts)?;
        texts.iter().map(|t| EmbeddingVector::new(self.embed_one(t))).collect()
    }

    fn fingerprint(&self) -> String {
        format!("mock-embed:dim={}", self.dim)
    }
}
