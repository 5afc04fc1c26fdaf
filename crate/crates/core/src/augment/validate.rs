//! Acceptance filter for generated text.

use std::collections::HashSet;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::corpus::{normalize, Corpus};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ValidationRules {
    pub min_tokens: usize,
    pub max_tokens: usize,
    /// Reject when trigram Jaccard similarity to an accepted sample exceeds this.
    pub near_duplicate_jaccard: f64,
}

impl Default for ValidationRules {
    fn default() -> Self {
        ValidationRules {
            min_tokens: 3,
            max_tokens: 100,
            near_duplicate_jaccard: 0.9,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RejectReason {
    Empty,
    TooShort,
    TooLong,
    ExactDuplicate,
    NearDuplicate,
}

impl fmt::Display for RejectReason {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            RejectReason::Empty => "empty",
            RejectReason::TooShort => "too-short",
            RejectReason::TooLong => "too-long",
            RejectReason::ExactDuplicate => "exact-duplicate",
            RejectReason::NearDuplicate => "near-duplicate",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Verdict {
    /// Carries the normalized form of the accepted text.
    Accept(String),
    Reject(RejectReason),
}

impl Verdict {
    pub fn is_accept(&self) -> bool {
        matches!(self, Verdict::Accept(_))
    }
}

type Trigram = (String, String, String);

pub fn trigrams(norm_text: &str) -> HashSet<Trigram> {
    let toks: Vec<&str> = norm_text.split_whitespace().collect();
    toks.windows(3)
        .map(|w| (w[0].to_string(), w[1].to_string(), w[2].to_string()))
        .collect()
}

pub fn jaccard<T: Eq + std::hash::Hash>(a: &HashSet<T>, b: &HashSet<T>) -> f64 {
    let union = a.union(b).count();
    if union == 0 {
        return 0.0;
    }
    a.intersection(b).count() as f64 / union as f64
}

/// Incremental validator: holds the normalized corpus texts and every sample
/// accepted so far.
#[derive(Debug, Clone)]
pub struct Validator {
    rules: ValidationRules,
    known: HashSet<String>,
    accepted: Vec<HashSet<Trigram>>,
}

impl Validator {
    pub fn new(corpus: &Corpus, rules: ValidationRules) -> Self {
        Validator {
            known: corpus.documents().iter().map(|d| d.normalized()).collect(),
            rules,
            accepted: Vec::new(),
        }
    }

    pub fn check(&self, candidate: &str) -> Verdict {
        let norm = normalize(candidate);
        let n_tokens = norm.split_whitespace().count();
        if n_tokens == 0 {
            return Verdict::Reject(RejectReason::Empty);
        }
        if n_tokens < self.rules.min_tokens {
            return Verdict::Reject(RejectReason::TooShort);
        }
        if n_tokens > self.rules.max_tokens {
            return Verdict::Reject(RejectReason::TooLong);
        }
        if self.known.contains(&norm) {
            return Verdict::Reject(RejectReason::ExactDuplicate);
        }
        let grams = trigrams(&norm);
        if self
            .accepted
            .iter()
            .any(|prev| jaccard(&grams, prev) > self.rules.near_duplicate_jaccard)
        {
            return Verdict::Reject(RejectReason::NearDuplicate);
        }
        Verdict::Accept(norm)
    }

    /// Records an accepted normalized text.
    pub fn accept(&mut self, norm: String) {
        self.accepted.push(trigrams(&norm));
        self.known.insert(norm);
    }

    /// Checks and, on acceptance, records in one step.
    pub fn admit(&mut self, candidate: &str) -> Verdict {
        let v = self.check(candidate);
        if let Verdict::Accept(norm) = &v {
            self.accept(norm.clone());
        }
        v
    }
}

/// One-shot form of [`Validator::check`].
pub fn validate_generated(
    candidate: &str,
    corpus: &Corpus,
    accepted_so_far: &[String],
    rules: &ValidationRules,
) -> Verdict {
    let mut v = Validator::new(corpus, rules.clone());
    for a in accepted_so_far {
        v.accept(normalize(a));
    }
    v.check(candidate)
}
