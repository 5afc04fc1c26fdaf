//! Minority-class augmentation engines: dual-class prompting, single-class
//! prompting and backtranslation.

pub mod prompt;
mod validate;

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;
use std::thread;

use rand::seq::index;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use serde_json::json;
use thiserror::Error;

use crate::corpus::{Corpus, Document, Label, Source};
use crate::providers::{sha256_hex, ChatProvider, GenerationParams, ProviderError, Translator};

pub use prompt::{build_dual_class_prompt, build_single_class_prompt, parse_completion, PromptTemplate};
pub use validate::{jaccard, trigrams, validate_generated, RejectReason, ValidationRules, Validator, Verdict};

#[derive(Debug, Error)]
pub enum AugmentError {
    #[error("invalid augmentation request: {0}")]
    Precondition(String),
    #[error("attempt budget exhausted after {attempts} attempts: accepted {accepted} of {target} samples")]
    BudgetExhausted {
        accepted: usize,
        target: usize,
        attempts: usize,
    },
    #[error("all {attempted} backtranslated samples were rejected")]
    AllRejected { attempted: usize },
    #[error(transparent)]
    Provider(#[from] ProviderError),
    #[error("batch file line {line}: {message}")]
    BatchFormat { line: usize, message: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PromptMode {
    Single,
    Dual,
}

impl PromptMode {
    pub fn source(self) -> Source {
        match self {
            PromptMode::Single => Source::SingleClassGen,
            PromptMode::Dual => Source::DualClassGen,
        }
    }
}

/// Where a synthetic sample came from.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Provenance {
    /// Ids of the documents shown in the prompt.
    Prompt {
        negative_examples: Vec<String>,
        positive_examples: Vec<String>,
    },
    /// Id of the document that was backtranslated.
    Backtranslation { source_id: String },
}

impl Provenance {
    pub fn ids(&self) -> Vec<&str> {
        match self {
            Provenance::Prompt {
                negative_examples,
                positive_examples,
            } => negative_examples
                .iter()
                .chain(positive_examples)
                .map(String::as_str)
                .collect(),
            Provenance::Backtranslation { source_id } => vec![source_id.as_str()],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AugmentedSample {
    pub document: Document,
    pub provenance: Provenance,
}

/// Output of one augmentation run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AugmentationBatch {
    pub source: Source,
    pub samples: Vec<AugmentedSample>,
    pub params: Option<GenerationParams>,
    pub params_digest: String,
    pub provider: String,
    /// Provider calls made (two translations count as one attempt).
    pub attempts: usize,
    pub rejected: usize,
    pub rejections: BTreeMap<RejectReason, usize>,
}

impl AugmentationBatch {
    fn empty(source: Source, params: Option<GenerationParams>, params_digest: String, provider: String) -> Self {
        AugmentationBatch {
            source,
            samples: Vec::new(),
            params,
            params_digest,
            provider,
            attempts: 0,
            rejected: 0,
            rejections: BTreeMap::new(),
        }
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn documents(&self) -> impl Iterator<Item = &Document> {
        self.samples.iter().map(|s| &s.document)
    }

    fn reject(&mut self, reason: RejectReason) {
        self.rejected += 1;
        *self.rejections.entry(reason).or_default() += 1;
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PromptedConfig {
    pub mode: PromptMode,
    pub target_count: usize,
    pub params: GenerationParams,
    pub seed: u64,
    /// Examples per class shown in the prompt. Dual mode requires 5.
    pub examples_per_class: usize,
    /// Attempt budget as a multiple of `target_count`.
    pub budget_factor: usize,
    /// Concurrent provider calls per wave. Output is identical for any value.
    pub in_flight: usize,
    pub rules: ValidationRules,
}

impl Default for PromptedConfig {
    fn default() -> Self {
        PromptedConfig {
            mode: PromptMode::Dual,
            target_count: 306,
            params: GenerationParams::default(),
            seed: 0,
            examples_per_class: prompt::DUAL_EXAMPLES_PER_CLASS,
            budget_factor: 10,
            in_flight: 1,
            rules: ValidationRules::default(),
        }
    }
}

struct PromptJob {
    prompt: String,
    provenance: Provenance,
}

/// Runs `f` over `items` with at most `width` concurrent calls, returning
/// results in input order.
fn in_waves<I: Sync, O: Send>(items: &[I], width: usize, f: impl Fn(&I) -> O + Sync) -> Vec<O> {
    if width <= 1 || items.len() <= 1 {
        return items.iter().map(&f).collect();
    }
    let mut out = Vec::with_capacity(items.len());
    for chunk in items.chunks(width) {
        let f = &f;
        let results: Vec<O> = thread::scope(|s| {
            let handles: Vec<_> = chunk.iter().map(|item| s.spawn(move || f(item))).collect();
            handles.into_iter().map(|h| h.join().expect("provider worker panicked")).collect()
        });
        out.extend(results);
    }
    out
}

fn sample_ids(rng: &mut ChaCha8Rng, pool: &[&Document], k: usize) -> Vec<usize> {
    index::sample(rng, pool.len(), k).into_vec()
}

/// Generates positive samples by few-shot prompting until `target_count`
/// pass validation or the attempt budget runs out.
///
/// Each attempt draws fresh examples uniformly without replacement (with
/// replacement across attempts). Everything is derived from `config.seed`,
/// so a deterministic provider gives an identical batch on every run.
pub fn generate_prompted(
    corpus: &Corpus,
    config: &PromptedConfig,
    provider: &dyn ChatProvider,
) -> Result<AugmentationBatch, AugmentError> {
    config.params.validate()?;
    let source = config.mode.source();
    let mut batch = AugmentationBatch::empty(
        source,
        Some(config.params.clone()),
        config.params.digest(),
        provider.fingerprint(),
    );
    if config.target_count == 0 {
        return Ok(batch);
    }
    let k = config.examples_per_class;
    if k == 0 {
        return Err(AugmentError::Precondition("examples_per_class must be >= 1".into()));
    }
    if config.mode == PromptMode::Dual && k != prompt::DUAL_EXAMPLES_PER_CLASS {
        return Err(AugmentError::Precondition(format!(
            "dual mode uses exactly {} examples per class",
            prompt::DUAL_EXAMPLES_PER_CLASS
        )));
    }
    let positives: Vec<&Document> = corpus.with_label(Label::Positive).collect();
    let negatives: Vec<&Document> = corpus.with_label(Label::Negative).collect();
    if positives.len() < k {
        return Err(AugmentError::Precondition(format!(
            "need at least {k} positive documents, corpus has {}",
            positives.len()
        )));
    }
    if config.mode == PromptMode::Dual && negatives.len() < k {
        return Err(AugmentError::Precondition(format!(
            "need at least {k} negative documents, corpus has {}",
            negatives.len()
        )));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut validator = Validator::new(corpus, config.rules.clone());
    let budget = config.budget_factor.max(1) * config.target_count;
    let width = config.in_flight.max(1);

    while batch.samples.len() < config.target_count {
        if batch.attempts >= budget {
            return Err(AugmentError::BudgetExhausted {
                accepted: batch.samples.len(),
                target: config.target_count,
                attempts: batch.attempts,
            });
        }
        let wave = width.min(budget - batch.attempts);
        let jobs: Vec<PromptJob> = (0..wave)
            .map(|_| {
                let pos = sample_ids(&mut rng, &positives, k);
                let pos_docs: Vec<&str> = pos.iter().map(|&i| positives[i].raw_text.as_str()).collect();
                let positive_examples = pos.iter().map(|&i| positives[i].id.clone()).collect();
                match config.mode {
                    PromptMode::Dual => {
                        let neg = sample_ids(&mut rng, &negatives, k);
                        let neg_docs: Vec<&str> = neg.iter().map(|&i| negatives[i].raw_text.as_str()).collect();
                        PromptJob {
                            prompt: PromptTemplate::default().render_dual(&neg_docs, &pos_docs),
                            provenance: Provenance::Prompt {
                                negative_examples: neg.iter().map(|&i| negatives[i].id.clone()).collect(),
                                positive_examples,
                            },
                        }
                    }
                    PromptMode::Single => PromptJob {
                        prompt: PromptTemplate::default().render_single(&pos_docs),
                        provenance: Provenance::Prompt {
                            negative_examples: Vec::new(),
                            positive_examples,
                        },
                    },
                }
            })
            .collect();
        let outputs = in_waves(&jobs, width, |job| provider.chat_generate(&job.prompt, &config.params));
        batch.attempts += jobs.len();
        for (job, output) in jobs.into_iter().zip(outputs) {
            if batch.samples.len() == config.target_count {
                break;
            }
            let text = parse_completion(&output?);
            match validator.admit(&text) {
                Verdict::Accept(_) => {
                    let id = format!("{}-{:05}", source.slug(), batch.samples.len() + 1);
                    batch.samples.push(AugmentedSample {
                        document: Document::new(id, text, Label::Positive, source),
                        provenance: job.provenance,
                    });
                }
                Verdict::Reject(reason) => batch.reject(reason),
            }
        }
    }
    Ok(batch)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct BacktranslationConfig {
    pub corpus_lang: String,
    pub pivot_lang: String,
    pub in_flight: usize,
    pub rules: ValidationRules,
}

impl Default for BacktranslationConfig {
    fn default() -> Self {
        BacktranslationConfig {
            corpus_lang: "id".to_string(),
            pivot_lang: "en".to_string(),
            in_flight: 1,
            rules: ValidationRules::default(),
        }
    }
}

/// Translates each document to the pivot language and back, keeping the
/// round trips that pass validation against `corpus` and earlier outputs.
pub fn backtranslate(
    documents: &[&Document],
    corpus: &Corpus,
    config: &BacktranslationConfig,
    translator: &dyn Translator,
) -> Result<AugmentationBatch, AugmentError> {
    if documents.is_empty() {
        return Err(AugmentError::Precondition("no documents to backtranslate".into()));
    }
    if config.pivot_lang == config.corpus_lang {
        return Err(AugmentError::Precondition(format!(
            "pivot language equals corpus language {:?}",
            config.corpus_lang
        )));
    }
    let params_digest = sha256_hex(
        json!({"corpus_lang": config.corpus_lang, "pivot_lang": config.pivot_lang})
            .to_string()
            .as_bytes(),
    );
    let mut batch = AugmentationBatch::empty(Source::Backtranslation, None, params_digest, translator.fingerprint());
    let mut validator = Validator::new(corpus, config.rules.clone());

    let round_trips = in_waves(documents, config.in_flight.max(1), |doc| {
        let there = translator.translate(&doc.raw_text, &config.corpus_lang, &config.pivot_lang)?;
        translator.translate(&there, &config.pivot_lang, &config.corpus_lang)
    });
    for (doc, back) in documents.iter().zip(round_trips) {
        batch.attempts += 1;
        let back = back?;
        match validator.admit(&back) {
            Verdict::Accept(_) => {
                let id = format!("{}-{:05}", Source::Backtranslation.slug(), batch.samples.len() + 1);
                batch.samples.push(AugmentedSample {
                    document: Document::new(id, back, Label::Positive, Source::Backtranslation),
                    provenance: Provenance::Backtranslation {
                        source_id: doc.id.clone(),
                    },
                });
            }
            Verdict::Reject(reason) => batch.reject(reason),
        }
    }
    if batch.samples.is_empty() {
        return Err(AugmentError::AllRejected {
            attempted: batch.attempts,
        });
    }
    if batch.rejected > 0 {
        log::info!(
            "backtranslation dropped {} of {} samples: {:?}",
            batch.rejected,
            batch.attempts,
            batch.rejections
        );
    }
    Ok(batch)
}

#[derive(Serialize, Deserialize)]
struct BatchRow {
    id: String,
    text: String,
    label: Label,
    source: Source,
    provenance: Provenance,
    params_digest: String,
}

/// Persists a batch as JSONL rows `{id, text, label, source, provenance, params_digest}`.
pub fn write_batch_jsonl(batch: &AugmentationBatch, path: &Path) -> Result<(), AugmentError> {
    let mut w = BufWriter::new(File::create(path)?);
    for s in &batch.samples {
        let row = BatchRow {
            id: s.document.id.clone(),
            text: s.document.raw_text.clone(),
            label: s.document.label,
            source: s.document.source,
            provenance: s.provenance.clone(),
            params_digest: batch.params_digest.clone(),
        };
        serde_json::to_writer(&mut w, &row).map_err(std::io::Error::from)?;
        w.write_all(b"\n")?;
    }
    w.flush()?;
    Ok(())
}

/// Reads a batch written by [`write_batch_jsonl`]. Run statistics are not
/// persisted, so `attempts` equals the sample count and `rejected` is zero.
pub fn read_batch_jsonl(path: &Path) -> Result<AugmentationBatch, AugmentError> {
    let reader = BufReader::new(File::open(path)?);
    let mut rows = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let row: BatchRow = serde_json::from_str(&line).map_err(|e| AugmentError::BatchFormat {
            line: i + 1,
            message: e.to_string(),
        })?;
        rows.push((i + 1, row));
    }
    let Some((_, first)) = rows.first() else {
        return Err(AugmentError::BatchFormat {
            line: 0,
            message: "batch file is empty".into(),
        });
    };
    let source = first.source;
    let params_digest = first.params_digest.clone();
    let mut batch = AugmentationBatch::empty(source, None, params_digest, format!("file:{}", path.display()));
    for (line, row) in rows {
        if row.source != source || row.label != Label::Positive {
            return Err(AugmentError::BatchFormat {
                line,
                message: "batch rows must share one source and be positive".into(),
            });
        }
        batch.samples.push(AugmentedSample {
            document: Document::new(row.id, row.text, row.label, row.source),
            provenance: row.provenance,
        });
    }
    batch.attempts = batch.samples.len();
    Ok(batch)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::providers::{MockChat, MockTranslator};

    fn corpus(n_pos: usize, n_neg: usize) -> Corpus {
        let mut docs = Vec::new();
        for i in 0..n_pos {
            docs.push(Document::new(
                format!("p{i}"),
                format!("benci kamu perempuan jahat kata{i} huruf{}", i % 7),
                Label::Positive,
                Source::Original,
            ));
        }
        for i in 0..n_neg {
            docs.push(Document::new(
                format!("n{i}"),
                format!("cuaca cerah hari ini makan{i} sore{}", i % 5),
                Label::Negative,
                Source::Original,
            ));
        }
        Corpus::new("t", docs).unwrap()
    }

    struct Constant;
    impl ChatProvider for Constant {
        fn chat_generate(&self, _: &str, _: &GenerationParams) -> Result<String, ProviderError> {
            Ok("selalu kalimat yang sama".into())
        }
        fn fingerprint(&self) -> String {
            "constant".into()
        }
    }

    #[test]
    fn target_zero_is_empty() {
        let cfg = PromptedConfig {
            target_count: 0,
            ..Default::default()
        };
        let b = generate_prompted(&corpus(10, 10), &cfg, &MockChat::new(1)).unwrap();
        assert!(b.is_empty());
        assert_eq!(b.attempts, 0);
    }

    #[test]
    fn constant_provider_exhausts_budget() {
        let cfg = PromptedConfig {
            target_count: 4,
            ..Default::default()
        };
        match generate_prompted(&corpus(10, 10), &cfg, &Constant) {
            Err(AugmentError::BudgetExhausted {
                accepted,
                target,
                attempts,
            }) => {
                assert_eq!((accepted, target, attempts), (1, 4, 40));
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn preconditions() {
        let cfg = PromptedConfig {
            target_count: 3,
            ..Default::default()
        };
        assert!(matches!(
            generate_prompted(&corpus(4, 10), &cfg, &MockChat::new(1)),
            Err(AugmentError::Precondition(_))
        ));
        assert!(matches!(
            generate_prompted(&corpus(10, 4), &cfg, &MockChat::new(1)),
            Err(AugmentError::Precondition(_))
        ));
        let single = PromptedConfig {
            mode: PromptMode::Single,
            ..cfg
        };
        generate_prompted(&corpus(10, 0), &single, &MockChat::new(1)).unwrap();
    }

    #[test]
    fn in_flight_width_does_not_change_batch() {
        let c = corpus(20, 20);
        let base = PromptedConfig {
            target_count: 15,
            seed: 5,
            ..Default::default()
        };
        let a = generate_prompted(&c, &base, &MockChat::new(2)).unwrap();
        let b = generate_prompted(&c, &PromptedConfig { in_flight: 4, ..base }, &MockChat::new(2)).unwrap();
        assert_eq!(a.samples, b.samples);
    }

    #[test]
    fn backtranslation_identity_rejects_everything() {
        let c = corpus(5, 5);
        let docs: Vec<&Document> = c.with_label(Label::Positive).collect();
        let err = backtranslate(&docs, &c, &Default::default(), &MockTranslator::identity()).unwrap_err();
        assert!(matches!(err, AugmentError::AllRejected { attempted: 5 }));
    }

    #[test]
    fn backtranslation_preconditions() {
        let c = corpus(5, 5);
        assert!(matches!(
            backtranslate(&[], &c, &Default::default(), &MockTranslator::perturbing(1)),
            Err(AugmentError::Precondition(_))
        ));
        let docs: Vec<&Document> = c.documents().iter().take(1).collect();
        let same = BacktranslationConfig {
            pivot_lang: "id".into(),
            ..Default::default()
        };
        assert!(matches!(
            backtranslate(&docs, &c, &same, &MockTranslator::perturbing(1)),
            Err(AugmentError::Precondition(_))
        ));
    }

    #[test]
    fn batch_jsonl_round_trip() {
        let c = corpus(10, 10);
        let cfg = PromptedConfig {
            target_count: 5,
            seed: 3,
            ..Default::default()
        };
        let b = generate_prompted(&c, &cfg, &MockChat::new(9)).unwrap();
        let f = tempfile::NamedTempFile::new().unwrap();
        write_batch_jsonl(&b, f.path()).unwrap();
        let back = read_batch_jsonl(f.path()).unwrap();
        assert_eq!(back.samples, b.samples);
        assert_eq!(back.params_digest, b.params_digest);
        assert_eq!(back.source, Source::DualClassGen);
    }
}
