//! Pipeline configuration: a TOML file whose keys mirror the command-line
//! flags. Flags override the file; unknown keys are rejected.

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use augbench::analysis::TsneConfig;
use augbench::augment::ValidationRules;
use augbench::corpus::synthetic::SynthConfig;
use augbench::corpus::{Format, Source};
use augbench::eval::CvMode;
use augbench::features::TfidfConfig;
use augbench::models::ClassifierKind;
use augbench::providers::{CacheMode, GenerationParams, HttpConfig};
use serde::{Deserialize, Serialize};

use crate::UsageError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Backtranslation,
    Single,
    Dual,
}

impl Method {
    pub const ALL: [Method; 3] = [Method::Backtranslation, Method::Single, Method::Dual];

    pub fn source(self) -> Source {
        match self {
            Method::Backtranslation => Source::Backtranslation,
            Method::Single => Source::SingleClassGen,
            Method::Dual => Source::DualClassGen,
        }
    }

    pub fn slug(self) -> &'static str {
        self.source().slug()
    }
}

impl FromStr for Method {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "backtranslation" | "bt" => Ok(Method::Backtranslation),
            "single" => Ok(Method::Single),
            "dual" => Ok(Method::Dual),
            other => Err(format!("unknown augmentation method {other:?}")),
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.slug())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ProviderKind {
    Mock,
    Http,
}

impl FromStr for ProviderKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "mock" => Ok(ProviderKind::Mock),
            "http" => Ok(ProviderKind::Http),
            other => Err(format!("unknown provider {other:?} (expected mock or http)")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EmbedderKind {
    Mock,
    Http,
    Precomputed,
}

impl FromStr for EmbedderKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "mock" => Ok(EmbedderKind::Mock),
            "http" => Ok(EmbedderKind::Http),
            "precomputed" => Ok(EmbedderKind::Precomputed),
            other => Err(format!("unknown embedder {other:?} (expected mock, http or precomputed)")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ProjectionInput {
    /// Embeddings when an embedder is configured, else TF-IDF.
    Auto,
    Embedding,
    Tfidf,
}

impl FromStr for ProjectionInput {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "auto" => Ok(ProjectionInput::Auto),
            "embedding" => Ok(ProjectionInput::Embedding),
            "tfidf" => Ok(ProjectionInput::Tfidf),
            other => Err(format!("unknown projection input {other:?}")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CorpusConfig {
    /// Input corpus; the synthetic generator is used when absent.
    pub path: Option<PathBuf>,
    /// Guessed from the extension when absent.
    pub format: Option<Format>,
    /// Negatives kept per positive by `balance`.
    pub balance_ratio: f64,
}

impl Default for CorpusConfig {
    fn default() -> Self {
        CorpusConfig {
            path: None,
            format: None,
            balance_ratio: 2.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AugmentationConfig {
    pub methods: Vec<Method>,
    /// Samples per method; defaults to the number of positives.
    pub target_count: Option<usize>,
    pub provider: ProviderKind,
    pub chat_endpoint: Option<String>,
    pub translate_endpoint: Option<String>,
    pub params: GenerationParams,
    /// Positive examples per single-class prompt.
    pub single_examples: usize,
    pub budget_factor: usize,
    pub in_flight: usize,
    pub corpus_lang: String,
    pub pivot_lang: String,
    /// Response cache directory; defaults to `<output_dir>/cache`.
    pub cache_dir: Option<PathBuf>,
    pub cache_mode: CacheMode,
    pub http: HttpConfig,
    pub rules: ValidationRules,
}

impl Default for AugmentationConfig {
    fn default() -> Self {
        AugmentationConfig {
            methods: Method::ALL.to_vec(),
            target_count: None,
            provider: ProviderKind::Mock,
            chat_endpoint: None,
            translate_endpoint: None,
            params: GenerationParams::default(),
            single_examples: 5,
            budget_factor: 10,
            in_flight: 1,
            corpus_lang: "id".into(),
            pivot_lang: "en".into(),
            cache_dir: None,
            cache_mode: CacheMode::Record,
            http: HttpConfig::default(),
            rules: ValidationRules::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EvaluationConfig {
    pub models: Vec<ClassifierKind>,
    pub k: usize,
    pub cv_mode: CvMode,
    pub tfidf: TfidfConfig,
}

impl Default for EvaluationConfig {
    fn default() -> Self {
        EvaluationConfig {
            models: ClassifierKind::ALL.to_vec(),
            k: 5,
            cv_mode: CvMode::HoldoutOriginal,
            tfidf: TfidfConfig::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EmbeddingConfig {
    pub provider: EmbedderKind,
    pub endpoint: Option<String>,
    /// JSONL `{id, vector}` rows for the precomputed embedder.
    pub path: Option<PathBuf>,
    pub mock_dim: usize,
}

impl Default for EmbeddingConfig {
    fn default() -> Self {
        EmbeddingConfig {
            provider: EmbedderKind::Mock,
            endpoint: None,
            path: None,
            mock_dim: 16,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ProjectionConfig {
    pub enabled: bool,
    pub input: ProjectionInput,
    pub pca_components: usize,
    pub tsne: TsneConfig,
}

impl Default for ProjectionConfig {
    fn default() -> Self {
        ProjectionConfig {
            enabled: true,
            input: ProjectionInput::Auto,
            pca_components: 50,
            tsne: TsneConfig::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PipelineConfig {
    pub output_dir: PathBuf,
    /// Seed for every stochastic stage.
    pub seed: u64,
    pub corpus: CorpusConfig,
    pub synthetic: SynthConfig,
    pub augmentation: AugmentationConfig,
    pub evaluation: EvaluationConfig,
    pub embedding: EmbeddingConfig,
    pub projection: ProjectionConfig,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            output_dir: PathBuf::from("out"),
            seed: 7,
            corpus: CorpusConfig::default(),
            synthetic: SynthConfig::default(),
            augmentation: AugmentationConfig::default(),
            evaluation: EvaluationConfig::default(),
            embedding: EmbeddingConfig::default(),
            projection: ProjectionConfig::default(),
        }
    }
}

impl PipelineConfig {
    pub fn load(path: &Path) -> Result<Self, UsageError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| UsageError(format!("cannot read config {}: {e}", path.display())))?;
        Self::parse(&text).map_err(|e| UsageError(format!("{}: {}", path.display(), e.0)))
    }

    pub fn parse(text: &str) -> Result<Self, UsageError> {
        toml::from_str(text).map_err(|e| UsageError(format!("invalid config: {e}")))
    }

    /// Checks cross-field constraints before any work starts.
    pub fn validate(&self) -> Result<(), UsageError> {
        let bad = |m: String| Err(UsageError(m));
        if !(self.corpus.balance_ratio > 0.0 && self.corpus.balance_ratio.is_finite()) {
            return bad(format!("corpus.balance_ratio must be positive, got {}", self.corpus.balance_ratio));
        }
        if self.evaluation.k < 2 {
            return bad(format!("evaluation.k must be at least 2, got {}", self.evaluation.k));
        }
        if self.evaluation.models.is_empty() {
            return bad("evaluation.models is empty".into());
        }
        if self.augmentation.target_count == Some(0) {
            return bad("augmentation.target_count must be positive".into());
        }
        if self.augmentation.single_examples == 0 {
            return bad("augmentation.single_examples must be positive".into());
        }
        if let Err(e) = self.augmentation.params.validate() {
            return bad(format!("augmentation.params: {e}"));
        }
        if self.augmentation.provider == ProviderKind::Http {
            let a = &self.augmentation;
            let needs_chat = a.methods.iter().any(|m| *m != Method::Backtranslation);
            if needs_chat && a.chat_endpoint.is_none() {
                return bad("augmentation.chat_endpoint is required with the http provider".into());
            }
            if a.methods.contains(&Method::Backtranslation) && a.translate_endpoint.is_none() {
                return bad("augmentation.translate_endpoint is required with the http provider".into());
            }
        }
        match self.embedding.provider {
            EmbedderKind::Http if self.embedding.endpoint.is_none() => {
                return bad("embedding.endpoint is required with the http embedder".into())
            }
            EmbedderKind::Precomputed if self.embedding.path.is_none() => {
                return bad("embedding.path is required with the precomputed embedder".into())
            }
            _ => {}
        }
        if self.projection.pca_components == 0 {
            return bad("projection.pca_components must be positive".into());
        }
        Ok(())
    }

    pub fn cache_dir(&self) -> PathBuf {
        self.augmentation
            .cache_dir
            .clone()
            .unwrap_or_else(|| self.output_dir.join("cache"))
    }
}
