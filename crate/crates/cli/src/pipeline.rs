//! Stage implementations shared by the subcommands and `run-all`.

use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use anyhow::{anyhow, bail, Context, Result};
use augbench::analysis::{
    emit_scatter, semantic_similarity, similarity_markdown, tsne, EmbeddingMatrix, Pca, PointTag, Projection2D,
    SimilarityRow,
};
use augbench::augment::{
    backtranslate, generate_prompted, read_batch_jsonl, write_batch_jsonl, AugmentationBatch, BacktranslationConfig,
    PromptMode, PromptedConfig,
};
use augbench::corpus::{
    balance, composition, ingest, synthetic, write_corpus, Composition, CompositionRow, Corpus, Document, Format, Label,
};
use augbench::eval::{evaluate_grid, gap_analysis, CvSettings, EvalReport};
use augbench::features::{tokenize, SparseVector, TfidfModel};
use augbench::models::ClassifierSpec;
use augbench::providers::{
    ChatProvider, Embedder, HttpChat, HttpEmbedder, HttpTranslator, MockChat, MockEmbedder, MockTranslator,
    PrecomputedEmbeddings, ResponseCache, Translator,
};
use augbench::providers::http::HttpTransport;
use augbench::report::{assemble_report, FigureRef};
use serde::{Deserialize, Serialize};

use crate::config::{EmbedderKind, Method, PipelineConfig, ProjectionInput, ProviderKind};
use crate::manifest::{CacheSummary, StageRecord};
use crate::UsageError;

pub const CORPUS_FILE: &str = "corpus.jsonl";
pub const BALANCED_FILE: &str = "balanced.jsonl";
pub const SYNTHETIC_FILE: &str = "synthetic.csv";
pub const COMPOSITION_FILE: &str = "composition.json";
pub const EVAL_FILE: &str = "eval_report.json";
pub const PERFORMANCE_FILE: &str = "model_performance.md";
pub const SIMILARITY_FILE: &str = "similarity.json";
pub const SIMILARITY_MD_FILE: &str = "similarity.md";
pub const PROJECTIONS_FILE: &str = "projections.json";
pub const REPORT_JSON: &str = "report.json";
pub const REPORT_MD: &str = "report.md";
pub const FIGURES_DIR: &str = "figures";

pub fn batch_file(method: Method) -> String {
    format!("augment-{}.jsonl", method.slug())
}

pub struct Stage<'a> {
    pub config: &'a PipelineConfig,
    pub record: StageRecord,
}

impl<'a> Stage<'a> {
    pub fn new(config: &'a PipelineConfig) -> Result<Self> {
        fs::create_dir_all(&config.output_dir)
            .with_context(|| format!("creating output directory {}", config.output_dir.display()))?;
        Ok(Stage {
            config,
            record: StageRecord::default(),
        })
    }

    fn out(&self, name: &str) -> PathBuf {
        self.config.output_dir.join(name)
    }

    fn input(&mut self, path: &Path) {
        self.record.inputs.push(path.to_path_buf());
    }

    fn artifact(&mut self, path: PathBuf) {
        self.record.artifacts.push(path);
    }

    fn write_json<T: Serialize>(&mut self, name: &str, value: &T) -> Result<PathBuf> {
        let path = self.out(name);
        let mut text = serde_json::to_string_pretty(value)?;
        text.push('\n');
        fs::write(&path, text).with_context(|| format!("writing {}", path.display()))?;
        self.artifact(path.clone());
        Ok(path)
    }

    fn write_text(&mut self, name: &str, text: &str) -> Result<PathBuf> {
        let path = self.out(name);
        fs::write(&path, text).with_context(|| format!("writing {}", path.display()))?;
        self.artifact(path.clone());
        Ok(path)
    }

    fn read_corpus_file(&mut self, path: &Path, format: Option<Format>) -> Result<Corpus> {
        let format = format
            .or_else(|| Format::from_path(path))
            .ok_or_else(|| UsageError(format!("cannot infer corpus format of {}; pass --format", path.display())))?;
        self.input(path);
        ingest(path, format).with_context(|| format!("reading corpus {}", path.display()))
    }

    /// The configured corpus, or the synthetic one when no path is set.
    pub fn raw_corpus(&mut self) -> Result<Corpus> {
        match self.config.corpus.path.clone() {
            Some(path) => self.read_corpus_file(&path, self.config.corpus.format),
            None => {
                self.record.seed("synthetic", self.config.synthetic.seed);
                Ok(synthetic::generate(&self.config.synthetic))
            }
        }
    }

    /// `input`, else a previously written balanced corpus, else the raw
    /// corpus balanced in memory.
    pub fn balanced_corpus(&mut self, input: Option<&Path>) -> Result<Corpus> {
        if let Some(path) = input {
            return self.read_corpus_file(path, None);
        }
        let written = self.out(BALANCED_FILE);
        if written.exists() {
            return self.read_corpus_file(&written, Some(Format::Jsonl));
        }
        let raw = self.raw_corpus()?;
        self.balance_corpus(&raw)
    }

    fn balance_corpus(&mut self, raw: &Corpus) -> Result<Corpus> {
        self.record.seed("balance", self.config.seed);
        Ok(balance(raw, self.config.corpus.balance_ratio, self.config.seed)?)
    }

    /// Explicit batch files, else every configured method's batch already in
    /// the output directory. Sorted into table order.
    pub fn batches(&mut self, explicit: &[PathBuf]) -> Result<Vec<AugmentationBatch>> {
        let paths: Vec<PathBuf> = if explicit.is_empty() {
            self.config
                .augmentation
                .methods
                .iter()
                .map(|m| self.out(&batch_file(*m)))
                .filter(|p| {
                    let found = p.exists();
                    if !found {
                        log::warn!("no augmentation batch at {}; skipping", p.display());
                    }
                    found
                })
                .collect()
        } else {
            explicit.to_vec()
        };
        let mut batches = Vec::with_capacity(paths.len());
        for p in paths {
            self.input(&p);
            batches.push(read_batch_jsonl(&p).with_context(|| format!("reading batch {}", p.display()))?);
        }
        batches.sort_by_key(|b| b.source.as_index());
        for pair in batches.windows(2) {
            if pair[0].source == pair[1].source {
                return Err(UsageError(format!("two augmentation batches from {}", pair[0].source)).into());
            }
        }
        Ok(batches)
    }

    fn cache(&mut self) -> Result<Option<Arc<ResponseCache>>> {
        let mode = self.config.augmentation.cache_mode;
        if mode == augbench::providers::CacheMode::Off {
            return Ok(None);
        }
        let dir = self.config.cache_dir();
        Ok(Some(Arc::new(ResponseCache::open(&dir, mode)?)))
    }

    fn transport(&self, cache: &Option<Arc<ResponseCache>>) -> Result<HttpTransport> {
        Ok(HttpTransport::new(&self.config.augmentation.http, cache.clone())?)
    }

    fn finish_http(&mut self, cache: Option<Arc<ResponseCache>>, transports: &[&HttpTransport]) {
        self.record.network_calls += transports.iter().map(|t| t.network_calls()).sum::<usize>();
        if let Some(c) = cache {
            let mut digests = c.touched();
            digests.sort();
            self.record.cache = Some(CacheSummary {
                dir: c.dir().display().to_string(),
                mode: c.mode(),
                digests,
            });
        }
    }

    pub fn synth_corpus(&mut self) -> Result<PathBuf> {
        self.record.seed("synthetic", self.config.synthetic.seed);
        let corpus = synthetic::generate(&self.config.synthetic);
        let path = self.out(SYNTHETIC_FILE);
        write_corpus(&corpus, &path, Format::Csv)?;
        self.artifact(path.clone());
        Ok(path)
    }

    pub fn ingest(&mut self) -> Result<Corpus> {
        let corpus = self.raw_corpus()?;
        let path = self.out(CORPUS_FILE);
        write_corpus(&corpus, &path, Format::Jsonl)?;
        self.artifact(path);
        self.write_json(COMPOSITION_FILE, &composition(&corpus).rows())?;
        log::info!(
            "ingested {} documents ({} positive)",
            corpus.len(),
            corpus.count(Label::Positive)
        );
        Ok(corpus)
    }

    pub fn balance(&mut self, input: Option<&Path>) -> Result<Corpus> {
        let raw = match input {
            Some(p) => self.read_corpus_file(p, None)?,
            None => {
                let written = self.out(CORPUS_FILE);
                if written.exists() {
                    self.read_corpus_file(&written, Some(Format::Jsonl))?
                } else {
                    self.raw_corpus()?
                }
            }
        };
        let balanced = self.balance_corpus(&raw)?;
        let path = self.out(BALANCED_FILE);
        write_corpus(&balanced, &path, Format::Jsonl)?;
        self.artifact(path);
        log::info!(
            "balanced to {} negative / {} positive",
            balanced.count(Label::Negative),
            balanced.count(Label::Positive)
        );
        Ok(balanced)
    }

    pub fn augment(&mut self, method: Method, input: Option<&Path>) -> Result<AugmentationBatch> {
        let corpus = self.balanced_corpus(input)?;
        let a = &self.config.augmentation;
        let seed = self.config.seed;
        let positives = corpus.count(Label::Positive);
        let target = a.target_count.unwrap_or(positives);
        self.record.seed(&format!("augment-{}", method.slug()), seed);

        let batch = match (method, a.provider) {
            (Method::Backtranslation, ProviderKind::Mock) => {
                self.run_backtranslation(&corpus, target, &MockTranslator::perturbing(seed))?
            }
            (Method::Backtranslation, ProviderKind::Http) => {
                let cache = self.cache()?;
                let endpoint = a.translate_endpoint.clone().expect("validated");
                let translator = HttpTranslator::new(endpoint, self.transport(&cache)?);
                let out = self.run_backtranslation(&corpus, target, &translator);
                self.finish_http(cache, &[translator.transport()]);
                out?
            }
            (_, ProviderKind::Mock) => self.run_prompted(&corpus, method, target, &MockChat::new(seed))?,
            (_, ProviderKind::Http) => {
                let cache = self.cache()?;
                let endpoint = a.chat_endpoint.clone().expect("validated");
                let chat = HttpChat::new(endpoint, self.transport(&cache)?);
                let out = self.run_prompted(&corpus, method, target, &chat);
                self.finish_http(cache, &[chat.transport()]);
                out?
            }
        };
        let path = self.out(&batch_file(method));
        write_batch_jsonl(&batch, &path)?;
        self.artifact(path);
        log::info!(
            "{}: {} samples from {} attempts ({} rejected)",
            method,
            batch.len(),
            batch.attempts,
            batch.rejected
        );
        Ok(batch)
    }

    fn run_backtranslation(
        &self,
        corpus: &Corpus,
        target: usize,
        translator: &dyn Translator,
    ) -> Result<AugmentationBatch> {
        let a = &self.config.augmentation;
        let docs: Vec<&Document> = corpus.with_label(Label::Positive).take(target).collect();
        if docs.len() < target {
            log::warn!(
                "backtranslation target {target} exceeds the {} positive documents; translating each once",
                docs.len()
            );
        }
        let cfg = BacktranslationConfig {
            corpus_lang: a.corpus_lang.clone(),
            pivot_lang: a.pivot_lang.clone(),
            in_flight: a.in_flight,
            rules: a.rules.clone(),
        };
        Ok(backtranslate(&docs, corpus, &cfg, translator)?)
    }

    fn run_prompted(
        &self,
        corpus: &Corpus,
        method: Method,
        target: usize,
        chat: &dyn ChatProvider,
    ) -> Result<AugmentationBatch> {
        let a = &self.config.augmentation;
        let (mode, examples) = match method {
            Method::Single => (PromptMode::Single, a.single_examples),
            Method::Dual => (PromptMode::Dual, augbench::augment::prompt::DUAL_EXAMPLES_PER_CLASS),
            Method::Backtranslation => unreachable!("handled by the caller"),
        };
        let cfg = PromptedConfig {
            mode,
            target_count: target,
            params: a.params.clone(),
            seed: self.config.seed,
            examples_per_class: examples,
            budget_factor: a.budget_factor,
            in_flight: a.in_flight,
            rules: a.rules.clone(),
        };
        Ok(generate_prompted(corpus, &cfg, chat)?)
    }

    pub fn trainval(&mut self, input: Option<&Path>, augmented: &[PathBuf]) -> Result<EvalReport> {
        let corpus = self.balanced_corpus(input)?;
        let batches = self.batches(augmented)?;
        let e = &self.config.evaluation;
        let seed = self.config.seed;
        self.record.seed("cv", seed);
        let specs: Vec<ClassifierSpec> = e.models.iter().map(|k| ClassifierSpec::default_for(*k, seed)).collect();
        let settings = CvSettings {
            k: e.k,
            seed,
            cv_mode: e.cv_mode,
            tfidf: e.tfidf,
        };
        let mut datasets = vec![None];
        datasets.extend(batches.iter().map(Some));
        let report = evaluate_grid::<f64>(&corpus, &datasets, &specs, &settings)?;

        let mut comp = composition(&corpus);
        for b in &batches {
            comp.add_all(b.documents());
        }
        self.write_json(COMPOSITION_FILE, &comp.rows())?;
        self.write_json(EVAL_FILE, &report)?;
        let mut md = report.to_markdown();
        md.push_str("\n| Dataset | Model | Accuracy - F1 gap | Flagged |\n|---|---|---|---|\n");
        for g in gap_analysis(&report)? {
            md.push_str(&format!(
                "| {} | {} | {:.3} | {} |\n",
                g.dataset,
                g.model.display_name(),
                g.gap,
                if g.flagged { "yes" } else { "no" }
            ));
        }
        self.write_text(PERFORMANCE_FILE, &md)?;
        Ok(report)
    }

    fn embedder(&mut self) -> Result<EmbedderHandle> {
        let e = &self.config.embedding;
        Ok(match e.provider {
            EmbedderKind::Mock => EmbedderHandle::Local(Box::new(MockEmbedder::new(e.mock_dim))),
            EmbedderKind::Precomputed => {
                let path = e.path.clone().expect("validated");
                self.input(&path);
                EmbedderHandle::Local(Box::new(PrecomputedEmbeddings::load(&path)?))
            }
            EmbedderKind::Http => {
                let endpoint = e.endpoint.clone().expect("validated");
                let cache = self.cache()?;
                let embedder = HttpEmbedder::new(endpoint, self.transport(&cache)?);
                EmbedderHandle::Http(embedder, cache)
            }
        })
    }

    fn finish_embedder(&mut self, handle: EmbedderHandle) {
        if let EmbedderHandle::Http(embedder, cache) = handle {
            self.finish_http(cache, &[embedder.transport()]);
        }
    }

    pub fn semsim(&mut self, input: Option<&Path>, augmented: &[PathBuf]) -> Result<Vec<SimilarityRow>> {
        let corpus = self.balanced_corpus(input)?;
        let batches = self.batches(augmented)?;
        if batches.is_empty() {
            bail!(UsageError("semsim needs at least one augmentation batch".into()));
        }
        let embedder = self.embedder()?;
        let originals: Vec<&Document> = corpus.with_label(Label::Positive).collect();
        let rows: Result<Vec<SimilarityRow>> = batches
            .iter()
            .map(|b| {
                let s = semantic_similarity(&originals, b, embedder.get())?;
                Ok(SimilarityRow::new(b.source, s))
            })
            .collect();
        self.finish_embedder(embedder);
        let rows = rows?;
        self.write_json(SIMILARITY_FILE, &rows)?;
        self.write_text(SIMILARITY_MD_FILE, &similarity_markdown(&rows))?;
        Ok(rows)
    }

    pub fn project(&mut self, input: Option<&Path>, augmented: &[PathBuf]) -> Result<Vec<ProjectionSummary>> {
        let corpus = self.balanced_corpus(input)?;
        let batches = self.batches(augmented)?;
        let p = &self.config.projection;
        let use_embeddings = match p.input {
            ProjectionInput::Auto | ProjectionInput::Embedding => true,
            ProjectionInput::Tfidf => false,
        };
        let embedder = if use_embeddings { Some(self.embedder()?) } else { None };
        let fig_dir = self.out(FIGURES_DIR);
        fs::create_dir_all(&fig_dir)?;
        let seed = self.config.seed;
        self.record.seed("tsne", seed);

        let mut sets: Vec<(String, String, Vec<&Document>)> = vec![(
            "original".into(),
            "t-SNE: Original".into(),
            corpus.documents().iter().collect(),
        )];
        for b in &batches {
            let mut docs: Vec<&Document> = corpus.documents().iter().collect();
            docs.extend(b.documents());
            sets.push((
                b.source.slug().into(),
                format!("t-SNE: Original + {}", b.source.display_name()),
                docs,
            ));
        }

        let mut summaries = Vec::new();
        for (name, title, docs) in sets {
            let x = match &embedder {
                Some(e) => embedding_features(&docs, e.get())?,
                None => tfidf_features(&docs, self.config)?,
            };
            let x = reduce(x, p.pca_components, seed)?;
            let ids = docs.iter().map(|d| d.id.clone()).collect();
            let tags = docs
                .iter()
                .map(|d| PointTag {
                    source: d.source,
                    label: d.label,
                })
                .collect();
            let proj: Projection2D = tsne(&x, ids, tags, &p.tsne, seed)
                .with_context(|| format!("projecting {name}"))?;
            let svg = fig_dir.join(format!("{name}.svg"));
            let csv = emit_scatter(&proj, &svg, &title)?;
            self.artifact(svg);
            self.artifact(csv);
            log::info!("projected {name}: n = {}, final KL = {:.4}", proj.n(), proj.final_kl);
            summaries.push(ProjectionSummary {
                name: name.clone(),
                title,
                svg: format!("{FIGURES_DIR}/{name}.svg"),
                csv: format!("{FIGURES_DIR}/{name}.csv"),
                input: if use_embeddings { "embedding" } else { "tfidf" }.into(),
                n: proj.n(),
                final_kl: proj.final_kl,
                kl_history: proj.kl_history.iter().map(|k| (k.iteration, k.kl)).collect(),
            });
        }
        if let Some(e) = embedder {
            self.finish_embedder(e);
        }
        self.write_json(PROJECTIONS_FILE, &summaries)?;
        Ok(summaries)
    }

    /// Assembles whatever sections exist under `from` into report.json and
    /// report.md in the output directory.
    pub fn report(&mut self, from: Option<&Path>) -> Result<(PathBuf, PathBuf)> {
        let dir = from.map(Path::to_path_buf).unwrap_or_else(|| self.config.output_dir.clone());
        let comp: Option<Vec<CompositionRow>> = self.read_optional(&dir.join(COMPOSITION_FILE))?;
        let eval: Option<EvalReport> = self.read_optional(&dir.join(EVAL_FILE))?;
        let sim: Option<Vec<SimilarityRow>> = self.read_optional(&dir.join(SIMILARITY_FILE))?;
        let proj: Option<Vec<ProjectionSummary>> = self.read_optional(&dir.join(PROJECTIONS_FILE))?;
        let comp = comp.map(|rows| Composition::from_rows(&rows));
        let figures: Option<Vec<FigureRef>> = proj.map(|ps| {
            ps.into_iter()
                .map(|p| FigureRef {
                    title: p.title,
                    svg: p.svg,
                    csv: p.csv,
                })
                .collect()
        });
        let report = assemble_report(comp.as_ref(), eval.as_ref(), sim.as_deref(), figures.as_deref())
            .map_err(|e| anyhow!(e).context(format!("no report inputs found in {}", dir.display())))?;
        let json = self.write_text(REPORT_JSON, &report.to_json_string())?;
        let md = self.write_text(REPORT_MD, &report.to_markdown())?;
        Ok((json, md))
    }

    fn read_optional<T: for<'de> Deserialize<'de>>(&mut self, path: &Path) -> Result<Option<T>> {
        if !path.exists() {
            return Ok(None);
        }
        self.input(path);
        let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        let value = serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))?;
        Ok(Some(value))
    }
}

enum EmbedderHandle {
    Local(Box<dyn Embedder>),
    Http(HttpEmbedder, Option<Arc<ResponseCache>>),
}

impl EmbedderHandle {
    fn get(&self) -> &dyn Embedder {
        match self {
            EmbedderHandle::Local(e) => e.as_ref(),
            EmbedderHandle::Http(e, _) => e,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProjectionSummary {
    pub name: String,
    pub title: String,
    /// Paths relative to the output directory.
    pub svg: String,
    pub csv: String,
    pub input: String,
    pub n: usize,
    pub final_kl: f64,
    pub kl_history: Vec<(usize, f64)>,
}

fn embedding_features(docs: &[&Document], embedder: &dyn Embedder) -> Result<Vec<Vec<f64>>> {
    let m = EmbeddingMatrix::<f64>::embed(docs, embedder)?;
    Ok(m.rows().to_vec())
}

fn tfidf_features(docs: &[&Document], config: &PipelineConfig) -> Result<Vec<Vec<f64>>> {
    let tokens: Vec<Vec<String>> = docs.iter().map(|d| tokenize(&d.normalized())).collect();
    let model = TfidfModel::<f64>::fit(&tokens, config.evaluation.tfidf)?;
    Ok(tokens.iter().map(|t| model.transform(t).to_dense()).collect())
}

/// PCA down to `k` dimensions when the input is wider than that.
fn reduce(x: Vec<Vec<f64>>, k: usize, seed: u64) -> Result<Vec<Vec<f64>>> {
    let d = x.first().map_or(0, Vec::len);
    if d <= k {
        return Ok(x);
    }
    let sparse: Vec<SparseVector<f64>> = x.iter().map(|r| SparseVector::from_dense(r)).collect();
    let pca = Pca::fit(&sparse, k, seed)?;
    Ok(sparse.iter().map(|r| pca.transform(r)).collect())
}
