//! Seeded stand-in corpus: two classes with distinct dominant vocabularies
//! mixed into a shared pool of noise tokens.

use std::collections::HashSet;

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{Corpus, Document, Label, Source};

const ONSETS: &[&str] = &[
    "b", "c", "d", "g", "h", "j", "k", "l", "m", "n", "p", "r", "s", "t", "w", "y", "ng", "ny",
];
const VOWELS: &[&str] = &["a", "i", "u", "e", "o"];
const CODAS: &[&str] = &["", "", "", "n", "k", "h", "ng", "r", "t"];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SynthConfig {
    pub negatives: usize,
    pub positives: usize,
    pub seed: u64,
    pub positive_vocab: usize,
    pub negative_vocab: usize,
    pub shared_vocab: usize,
    pub min_tokens: usize,
    pub max_tokens: usize,
    /// Probability that a token comes from the document's own class vocabulary.
    pub signal_rate: f64,
    /// Probability that a token comes from the other class's vocabulary.
    pub crossover_rate: f64,
    /// Probability of decorating a document with a handle, a number or punctuation.
    pub decoration_rate: f64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        SynthConfig {
            negatives: 2000,
            positives: 100,
            seed: 20240318,
            positive_vocab: 60,
            negative_vocab: 150,
            shared_vocab: 400,
            min_tokens: 8,
            max_tokens: 16,
            signal_rate: 0.25,
            crossover_rate: 0.08,
            decoration_rate: 0.3,
        }
    }
}

fn pseudo_word(rng: &mut impl Rng) -> String {
    let syllables = rng.random_range(2..=3);
    let mut w = String::new();
    for i in 0..syllables {
        w.push_str(ONSETS[rng.random_range(0..ONSETS.len())]);
        w.push_str(VOWELS[rng.random_range(0..VOWELS.len())]);
        if i + 1 == syllables {
            w.push_str(CODAS[rng.random_range(0..CODAS.len())]);
        }
    }
    w
}

struct Vocab {
    words: Vec<String>,
    weights: WeightedIndex<f64>,
}

impl Vocab {
    fn new(size: usize, taken: &mut HashSet<String>, rng: &mut impl Rng) -> Self {
        let mut words = Vec::with_capacity(size);
        while words.len() < size {
            let w = pseudo_word(rng);
            if taken.insert(w.clone()) {
                words.push(w);
            }
        }
        // Zipf-like: a few dominant tokens per vocabulary.
        let weights = WeightedIndex::new((1..=size).map(|r| 1.0 / r as f64)).expect("nonempty vocabulary");
        Vocab { words, weights }
    }

    fn draw<'a>(&'a self, rng: &mut impl Rng) -> &'a str {
        &self.words[self.weights.sample(rng)]
    }
}

/// Generates the imbalanced two-class corpus. Positives come first, then
/// negatives, each with ids `synth-NNNNN`.
pub fn generate(config: &SynthConfig) -> Corpus {
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut taken = HashSet::new();
    let pos = Vocab::new(config.positive_vocab.max(1), &mut taken, &mut rng);
    let neg = Vocab::new(config.negative_vocab.max(1), &mut taken, &mut rng);
    let shared = Vocab::new(config.shared_vocab.max(1), &mut taken, &mut rng);

    let total = config.positives + config.negatives;
    let mut docs = Vec::with_capacity(total);
    let mut seen_text = HashSet::new();
    let mut i = 0;
    while docs.len() < total {
        let label = if docs.len() < config.positives {
            Label::Positive
        } else {
            Label::Negative
        };
        let (own, other) = match label {
            Label::Positive => (&pos, &neg),
            Label::Negative => (&neg, &pos),
        };
        let len = rng.random_range(config.min_tokens..=config.max_tokens.max(config.min_tokens));
        let mut tokens: Vec<String> = (0..len)
            .map(|_| {
                let u: f64 = rng.random();
                if u < config.signal_rate {
                    own.draw(&mut rng).to_string()
                } else if u < config.signal_rate + config.crossover_rate {
                    other.draw(&mut rng).to_string()
                } else {
                    shared.draw(&mut rng).to_string()
                }
            })
            .collect();
        if rng.random_bool(config.decoration_rate.clamp(0.0, 1.0)) {
            match rng.random_range(0..3) {
                0 => tokens.insert(0, format!("@user{}", rng.random_range(0..500))),
                1 => tokens.push(rng.random_range(1..2025).to_string()),
                _ => {
                    if let Some(last) = tokens.last_mut() {
                        last.push_str("!!");
                    }
                }
            }
        }
        let text = tokens.join(" ");
        i += 1;
        if !seen_text.insert(text.clone()) {
            continue;
        }
        docs.push(Document::new(format!("synth-{:05}", docs.len() + 1), text, label, Source::Original));
        debug_assert!(i < total * 100, "generator failed to produce distinct documents");
    }
    Corpus::new("synthetic", docs).expect("generated ids are unique")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_sizes_and_determinism() {
        let cfg = SynthConfig::default();
        let a = generate(&cfg);
        assert_eq!(a.count(Label::Negative), 2000);
        assert_eq!(a.count(Label::Positive), 100);
        let b = generate(&cfg);
        assert_eq!(a, b);
        let c = generate(&SynthConfig { seed: 1, ..cfg });
        assert_ne!(a.documents()[0].raw_text, c.documents()[0].raw_text);
    }
}
