//! Command-line driver for the augmentation pipeline.
//!
//! Exit codes: 0 success, 1 usage or configuration error, 2 data error,
//! 3 provider error.

pub mod config;
pub mod manifest;
pub mod pipeline;

use std::ffi::OsString;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use augbench::analysis::AnalysisError;
use augbench::augment::AugmentError;
use augbench::corpus::Format;
use augbench::eval::CvMode;
use augbench::models::ClassifierKind;
use augbench::providers::{CacheMode, ProviderError};
use clap::{Args, Parser, Subcommand};
use thiserror::Error;

use crate::config::{EmbedderKind, Method, PipelineConfig, ProjectionInput, ProviderKind};
use crate::manifest::{unix_now, StageRecord};
use crate::pipeline::Stage;

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_DATA: i32 = 2;
pub const EXIT_PROVIDER: i32 = 3;

/// Bad flags, bad configuration, or a request that cannot be satisfied as
/// stated.
#[derive(Debug, Error)]
#[error("{0}")]
pub struct UsageError(pub String);

#[derive(Debug, Parser)]
#[command(name = "augbench", version, about = "Minority-class text augmentation benchmark")]
pub struct Cli {
    /// TOML pipeline configuration; flags override its values.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Directory receiving every artifact and manifest.
    #[arg(long, short = 'o', global = true)]
    pub output_dir: Option<PathBuf>,
    /// Seed for every stochastic stage.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Write the seeded synthetic corpus as CSV.
    SynthCorpus {
        #[arg(long)]
        negatives: Option<usize>,
        #[arg(long)]
        positives: Option<usize>,
        #[arg(long)]
        synth_seed: Option<u64>,
    },
    /// Read a corpus and write it as JSONL with its composition.
    Ingest {
        #[arg(long)]
        input: Option<PathBuf>,
        #[arg(long)]
        format: Option<Format>,
    },
    /// Undersample negatives to a fixed ratio per positive.
    Balance {
        #[arg(long)]
        input: Option<PathBuf>,
        #[arg(long)]
        ratio: Option<f64>,
    },
    /// Generate one augmentation batch.
    Augment {
        #[arg(long)]
        method: Method,
        #[arg(long)]
        target: Option<usize>,
        #[arg(long)]
        provider: Option<ProviderKind>,
        #[arg(long)]
        input: Option<PathBuf>,
        #[command(flatten)]
        http: HttpArgs,
    },
    /// Cross-validate every model on the original and augmented datasets.
    Trainval {
        #[arg(long)]
        input: Option<PathBuf>,
        /// Augmentation batch files; defaults to those in the output directory.
        #[arg(long, num_args = 1..)]
        augmented: Vec<PathBuf>,
        #[arg(long, value_delimiter = ',')]
        models: Option<Vec<ClassifierKind>>,
        #[arg(long)]
        k: Option<usize>,
        #[arg(long)]
        cv_mode: Option<CvMode>,
    },
    /// Centroid similarity of each batch to the original positives.
    Semsim {
        #[arg(long)]
        input: Option<PathBuf>,
        #[arg(long, num_args = 1..)]
        augmented: Vec<PathBuf>,
        #[command(flatten)]
        embed: EmbedArgs,
    },
    /// t-SNE scatter plots of the original and each augmented dataset.
    Project {
        #[arg(long)]
        input: Option<PathBuf>,
        #[arg(long, num_args = 1..)]
        augmented: Vec<PathBuf>,
        #[arg(long)]
        projection_input: Option<ProjectionInput>,
        #[arg(long)]
        iterations: Option<usize>,
        #[arg(long)]
        perplexity: Option<f64>,
        #[command(flatten)]
        embed: EmbedArgs,
    },
    /// Combine available results into report.md and report.json.
    Report {
        /// Directory holding stage outputs; defaults to the output directory.
        #[arg(long)]
        from: Option<PathBuf>,
    },
    /// Every stage in order.
    RunAll {
        #[arg(long)]
        provider: Option<ProviderKind>,
        #[command(flatten)]
        http: HttpArgs,
        #[command(flatten)]
        embed: EmbedArgs,
    },
}

#[derive(Debug, Args)]
pub struct HttpArgs {
    #[arg(long)]
    pub chat_endpoint: Option<String>,
    #[arg(long)]
    pub translate_endpoint: Option<String>,
    #[arg(long)]
    pub cache_dir: Option<PathBuf>,
    #[arg(long)]
    pub cache_mode: Option<CacheMode>,
    #[arg(long)]
    pub in_flight: Option<usize>,
}

#[derive(Debug, Args)]
pub struct EmbedArgs {
    #[arg(long)]
    pub embedder: Option<EmbedderKind>,
    #[arg(long)]
    pub embedding_endpoint: Option<String>,
    #[arg(long)]
    pub embedding_path: Option<PathBuf>,
}

impl HttpArgs {
    fn apply(&self, c: &mut PipelineConfig) {
        let a = &mut c.augmentation;
        set(&mut a.chat_endpoint, self.chat_endpoint.clone().map(Some));
        set(&mut a.translate_endpoint, self.translate_endpoint.clone().map(Some));
        set(&mut a.cache_dir, self.cache_dir.clone().map(Some));
        set(&mut a.cache_mode, self.cache_mode);
        set(&mut a.in_flight, self.in_flight);
    }
}

impl EmbedArgs {
    fn apply(&self, c: &mut PipelineConfig) {
        let e = &mut c.embedding;
        set(&mut e.provider, self.embedder);
        set(&mut e.endpoint, self.embedding_endpoint.clone().map(Some));
        set(&mut e.path, self.embedding_path.clone().map(Some));
    }
}

fn set<T>(slot: &mut T, value: Option<T>) {
    if let Some(v) = value {
        *slot = v;
    }
}

impl Cli {
    /// Loads the config file (or defaults), applies flags, validates.
    pub fn resolve_config(&self) -> Result<PipelineConfig, UsageError> {
        let mut c = match &self.config {
            Some(p) => PipelineConfig::load(p)?,
            None => PipelineConfig::default(),
        };
        set(&mut c.output_dir, self.output_dir.clone());
        set(&mut c.seed, self.seed);
        match &self.command {
            Command::SynthCorpus {
                negatives,
                positives,
                synth_seed,
            } => {
                set(&mut c.synthetic.negatives, *negatives);
                set(&mut c.synthetic.positives, *positives);
                set(&mut c.synthetic.seed, *synth_seed);
            }
            Command::Ingest { input, format } => {
                set(&mut c.corpus.path, input.clone().map(Some));
                set(&mut c.corpus.format, format.map(Some));
            }
            Command::Balance { ratio, .. } => set(&mut c.corpus.balance_ratio, *ratio),
            Command::Augment {
                method,
                target,
                provider,
                http,
                ..
            } => {
                c.augmentation.methods = vec![*method];
                set(&mut c.augmentation.target_count, target.map(Some));
                set(&mut c.augmentation.provider, *provider);
                http.apply(&mut c);
            }
            Command::Trainval { models, k, cv_mode, .. } => {
                set(&mut c.evaluation.models, models.clone());
                set(&mut c.evaluation.k, *k);
                set(&mut c.evaluation.cv_mode, *cv_mode);
            }
            Command::Semsim { embed, .. } => embed.apply(&mut c),
            Command::Project {
                projection_input,
                iterations,
                perplexity,
                embed,
                ..
            } => {
                set(&mut c.projection.input, *projection_input);
                set(&mut c.projection.tsne.iterations, *iterations);
                set(&mut c.projection.tsne.perplexity, *perplexity);
                embed.apply(&mut c);
            }
            Command::Report { .. } => {}
            Command::RunAll { provider, http, embed } => {
                set(&mut c.augmentation.provider, *provider);
                http.apply(&mut c);
                embed.apply(&mut c);
            }
        }
        c.validate()?;
        Ok(c)
    }

    fn name(&self) -> &'static str {
        match self.command {
            Command::SynthCorpus { .. } => "synth-corpus",
            Command::Ingest { .. } => "ingest",
            Command::Balance { .. } => "balance",
            Command::Augment { .. } => "augment",
            Command::Trainval { .. } => "trainval",
            Command::Semsim { .. } => "semsim",
            Command::Project { .. } => "project",
            Command::Report { .. } => "report",
            Command::RunAll { .. } => "run-all",
        }
    }
}

/// Maps an error chain to an exit code.
pub fn exit_code(err: &anyhow::Error) -> i32 {
    for cause in err.chain() {
        if cause.downcast_ref::<UsageError>().is_some() {
            return EXIT_USAGE;
        }
        if cause.downcast_ref::<ProviderError>().is_some() {
            return EXIT_PROVIDER;
        }
        if let Some(AugmentError::Provider(_)) = cause.downcast_ref::<AugmentError>() {
            return EXIT_PROVIDER;
        }
        if let Some(AnalysisError::Provider(_)) = cause.downcast_ref::<AnalysisError>() {
            return EXIT_PROVIDER;
        }
    }
    EXIT_DATA
}

/// Parses `argv`, runs the command and returns the process exit code.
/// Errors go to standard error.
pub fn run<I, S>(argv: I) -> i32
where
    I: IntoIterator<Item = S>,
    S: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let _ = e.print();
            return code;
        }
    };
    match execute(&cli) {
        Ok(()) => EXIT_OK,
        Err(e) => {
            eprintln!("error: {e:#}");
            exit_code(&e)
        }
    }
}

pub fn execute(cli: &Cli) -> Result<()> {
    let config = cli.resolve_config()?;
    let started = unix_now();
    let mut stage = Stage::new(&config)?;
    match &cli.command {
        Command::SynthCorpus { .. } => {
            stage.synth_corpus()?;
        }
        Command::Ingest { .. } => {
            stage.ingest()?;
        }
        Command::Balance { input, .. } => {
            stage.balance(input.as_deref())?;
        }
        Command::Augment { method, input, .. } => {
            stage.augment(*method, input.as_deref())?;
        }
        Command::Trainval { input, augmented, .. } => {
            stage.trainval(input.as_deref(), augmented)?;
        }
        Command::Semsim { input, augmented, .. } => {
            stage.semsim(input.as_deref(), augmented)?;
        }
        Command::Project { input, augmented, .. } => {
            stage.project(input.as_deref(), augmented)?;
        }
        Command::Report { from } => {
            stage.report(from.as_deref())?;
        }
        Command::RunAll { .. } => {
            let record = run_all(&config)?;
            record.write_manifest(cli.name(), &config, started)?;
            return Ok(());
        }
    }
    stage.record.write_manifest(cli.name(), &config, started)?;
    Ok(())
}

/// Paths of the final report.
#[derive(Debug, Clone)]
pub struct ReportPaths {
    pub json: PathBuf,
    pub markdown: PathBuf,
}

/// Runs ingest, balance, every configured augmentation, trainval, semsim,
/// project and report. Each stage reads what the previous one wrote.
pub fn run_all(config: &PipelineConfig) -> Result<StageRecord> {
    config.validate()?;
    let mut total = StageRecord::default();
    let mut step = |name: &str, f: &mut dyn FnMut(&mut Stage) -> Result<()>| -> Result<()> {
        let mut stage = Stage::new(config)?;
        log::info!("stage {name}");
        f(&mut stage).with_context(|| format!("stage {name} failed"))?;
        total.merge(stage.record);
        Ok(())
    };
    step("ingest", &mut |s| s.ingest().map(drop))?;
    step("balance", &mut |s| s.balance(None).map(drop))?;
    for m in &config.augmentation.methods {
        step(&format!("augment-{}", m.slug()), &mut |s| s.augment(*m, None).map(drop))?;
    }
    step("trainval", &mut |s| s.trainval(None, &[]).map(drop))?;
    step("semsim", &mut |s| s.semsim(None, &[]).map(drop))?;
    if config.projection.enabled {
        step("project", &mut |s| s.project(None, &[]).map(drop))?;
    }
    step("report", &mut |s| s.report(None).map(drop))?;
    Ok(total)
}

/// Report locations under an output directory.
pub fn report_paths(output_dir: &Path) -> ReportPaths {
    ReportPaths {
        json: output_dir.join(pipeline::REPORT_JSON),
        markdown: output_dir.join(pipeline::REPORT_MD),
    }
}
