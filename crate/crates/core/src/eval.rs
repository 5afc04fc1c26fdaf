//! Stratified k-fold cross-validation, classification metrics and the
//! accuracy/F1 gap table.

use std::fmt::Write as _;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::augment::AugmentationBatch;
use crate::corpus::{Corpus, Document, Label, Source};
use crate::features::{tokenize, FeatureError, TfidfConfig, TfidfModel};
use crate::models::{self, ClassifierKind, ClassifierSpec, ModelError};
use crate::scalar::Scalar;

/// Gaps above this are flagged by [`gap_analysis`].
pub const GAP_THRESHOLD: f64 = 0.05;

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("k must be at least 2, got {0}")]
    InvalidK(usize),
    #[error("cannot split {n} documents into {k} folds")]
    TooFewDocuments { n: usize, k: usize },
    #[error("{predictions} predictions but {truth} true labels")]
    LengthMismatch { predictions: usize, truth: usize },
    #[error("metrics need at least one prediction")]
    EmptyInput,
    #[error("fold {0} has no test documents")]
    EmptyFold(usize),
    #[error("augmented document {id} landed in test fold {fold}")]
    Leakage { id: String, fold: usize },
    #[error("report has no cells")]
    EmptyReport,
    #[error(transparent)]
    Feature(#[from] FeatureError),
    #[error(transparent)]
    Model(#[from] ModelError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CvMode {
    /// Folds over original documents only; augmented samples join every
    /// training split and never a test split.
    #[default]
    HoldoutOriginal,
    /// Folds over the union of original and augmented documents.
    Mixed,
}

impl CvMode {
    pub fn as_str(self) -> &'static str {
        match self {
            CvMode::HoldoutOriginal => "holdout_original",
            CvMode::Mixed => "mixed",
        }
    }
}

impl std::str::FromStr for CvMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().replace('-', "_").as_str() {
            "holdout_original" => Ok(CvMode::HoldoutOriginal),
            "mixed" => Ok(CvMode::Mixed),
            other => Err(format!("unknown cv mode {other:?}")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FoldAssignment {
    pub k: usize,
    /// Fold index for each input position.
    pub fold_of: Vec<usize>,
}

impl FoldAssignment {
    pub fn test_indices(&self, fold: usize) -> Vec<usize> {
        (0..self.fold_of.len()).filter(|&i| self.fold_of[i] == fold).collect()
    }
}

/// Shuffles each label's positions with a seeded RNG, then deals them
/// round-robin into `k` folds, continuing the rotation from one label to the
/// next so fold sizes stay within one of each other.
pub fn stratified_kfold(labels: &[Label], k: usize, seed: u64) -> Result<FoldAssignment, EvalError> {
    if k < 2 {
        return Err(EvalError::InvalidK(k));
    }
    if k > labels.len() {
        return Err(EvalError::TooFewDocuments { n: labels.len(), k });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut fold_of = vec![0; labels.len()];
    let mut next = 0;
    for label in Label::ALL {
        let mut members: Vec<usize> = (0..labels.len()).filter(|&i| labels[i] == label).collect();
        if !members.is_empty() && members.len() < k {
            log::warn!("label {label} has {} members, fewer than k = {k}", members.len());
        }
        members.shuffle(&mut rng);
        for i in members {
            fold_of[i] = next % k;
            next += 1;
        }
    }
    Ok(FoldAssignment { k, fold_of })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct Confusion {
    pub tp: usize,
    pub fp: usize,
    #[serde(rename = "fn")]
    pub fn_: usize,
    pub tn: usize,
}

impl Confusion {
    pub fn total(&self) -> usize {
        self.tp + self.fp + self.fn_ + self.tn
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub accuracy: f64,
    pub f1_positive: f64,
    pub f1_macro: f64,
    pub confusion: Confusion,
}

fn ratio(num: usize, den: usize) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

fn f1(tp: usize, fp: usize, fn_: usize) -> f64 {
    let p = ratio(tp, tp + fp);
    let r = ratio(tp, tp + fn_);
    if p + r == 0.0 {
        0.0
    } else {
        2.0 * p * r / (p + r)
    }
}

pub fn compute_metrics(predictions: &[Label], truth: &[Label]) -> Result<Metrics, EvalError> {
    if predictions.len() != truth.len() {
        return Err(EvalError::LengthMismatch {
            predictions: predictions.len(),
            truth: truth.len(),
        });
    }
    if truth.is_empty() {
        return Err(EvalError::EmptyInput);
    }
    let mut c = Confusion::default();
    for (&p, &t) in predictions.iter().zip(truth) {
        match (p, t) {
            (Label::Positive, Label::Positive) => c.tp += 1,
            (Label::Positive, Label::Negative) => c.fp += 1,
            (Label::Negative, Label::Positive) => c.fn_ += 1,
            (Label::Negative, Label::Negative) => c.tn += 1,
        }
    }
    let f1_positive = f1(c.tp, c.fp, c.fn_);
    let f1_negative = f1(c.tn, c.fn_, c.fp);
    Ok(Metrics {
        accuracy: ratio(c.tp + c.tn, c.total()),
        f1_positive,
        f1_macro: (f1_positive + f1_negative) / 2.0,
        confusion: c,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct MetricSummary {
    pub accuracy: f64,
    pub f1_positive: f64,
    pub f1_macro: f64,
}

pub fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// Sample standard deviation (n - 1 denominator); zero for a single value.
pub fn sample_std(xs: &[f64]) -> f64 {
    if xs.len() < 2 {
        return 0.0;
    }
    let m = mean(xs);
    (xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (xs.len() - 1) as f64).sqrt()
}

fn summarize(folds: &[Metrics], stat: fn(&[f64]) -> f64) -> MetricSummary {
    let col = |f: fn(&Metrics) -> f64| stat(&folds.iter().map(f).collect::<Vec<_>>());
    MetricSummary {
        accuracy: col(|m| m.accuracy),
        f1_positive: col(|m| m.f1_positive),
        f1_macro: col(|m| m.f1_macro),
    }
}

/// Row label for a dataset configuration.
pub fn dataset_name(augmentation: Option<Source>) -> &'static str {
    match augmentation {
        None | Some(Source::Original) => "Original",
        Some(Source::Backtranslation) => "Backtranslated",
        Some(Source::SingleClassGen) => "Single-class prompt generation",
        Some(Source::DualClassGen) => "Dual-class prompt generation",
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CvSettings {
    pub k: usize,
    pub seed: u64,
    pub cv_mode: CvMode,
    pub tfidf: TfidfConfig,
}

impl Default for CvSettings {
    fn default() -> Self {
        CvSettings {
            k: 5,
            seed: 42,
            cv_mode: CvMode::HoldoutOriginal,
            tfidf: TfidfConfig::default(),
        }
    }
}

/// One train/test split of a cross-validation run.
#[derive(Debug, Clone)]
pub struct Split<'a> {
    pub fold: usize,
    pub train: Vec<&'a Document>,
    pub test: Vec<&'a Document>,
}

/// Builds the k splits for a dataset configuration under `settings.cv_mode`.
pub fn cv_splits<'a>(
    original: &'a Corpus,
    augmentation: Option<&'a AugmentationBatch>,
    settings: &CvSettings,
) -> Result<Vec<Split<'a>>, EvalError> {
    let augmented: Vec<&Document> = augmentation.map(|b| b.documents().collect()).unwrap_or_default();
    let originals: Vec<&Document> = original.documents().iter().collect();
    let (pool, always_train): (Vec<&Document>, Vec<&Document>) = match settings.cv_mode {
        CvMode::HoldoutOriginal => (originals, augmented),
        CvMode::Mixed => (originals.into_iter().chain(augmented).collect(), Vec::new()),
    };
    let labels: Vec<Label> = pool.iter().map(|d| d.label).collect();
    let folds = stratified_kfold(&labels, settings.k, settings.seed)?;
    let mut splits = Vec::with_capacity(settings.k);
    for fold in 0..settings.k {
        let mut train = Vec::new();
        let mut test = Vec::new();
        for (i, d) in pool.iter().enumerate() {
            if folds.fold_of[i] == fold {
                test.push(*d);
            } else {
                train.push(*d);
            }
        }
        train.extend(always_train.iter().copied());
        if test.is_empty() {
            return Err(EvalError::EmptyFold(fold));
        }
        if settings.cv_mode == CvMode::HoldoutOriginal {
            if let Some(d) = test.iter().find(|d| d.source != Source::Original) {
                return Err(EvalError::Leakage {
                    id: d.id.clone(),
                    fold,
                });
            }
        }
        splits.push(Split { fold, train, test });
    }
    Ok(splits)
}

/// Cross-validation result for one (dataset, model) pair.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalCell {
    pub dataset: String,
    pub model: ClassifierKind,
    pub folds: Vec<Metrics>,
    pub mean: MetricSummary,
    pub std: MetricSummary,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub warnings: Vec<String>,
}

impl EvalCell {
    pub fn from_folds(dataset: impl Into<String>, model: ClassifierKind, folds: Vec<Metrics>) -> Self {
        EvalCell {
            dataset: dataset.into(),
            model,
            mean: summarize(&folds, mean),
            std: summarize(&folds, sample_std),
            folds,
            warnings: Vec::new(),
        }
    }
}

/// Runs k-fold CV. Per fold, TF-IDF is fitted on the training documents
/// only, then the classifier; folds run in parallel.
pub fn cross_validate<T: Scalar>(
    original: &Corpus,
    augmentation: Option<&AugmentationBatch>,
    spec: &ClassifierSpec,
    settings: &CvSettings,
) -> Result<EvalCell, EvalError> {
    let splits = cv_splits(original, augmentation, settings)?;
    let per_fold: Vec<Result<(Metrics, Vec<String>), EvalError>> = splits
        .par_iter()
        .map(|split| evaluate_split::<T>(split, spec, settings))
        .collect();
    let mut folds = Vec::with_capacity(per_fold.len());
    let mut warnings = Vec::new();
    for r in per_fold {
        let (m, w) = r?;
        folds.push(m);
        warnings.extend(w);
    }
    let mut cell = EvalCell::from_folds(dataset_name(augmentation.map(|b| b.source)), spec.kind(), folds);
    cell.warnings = warnings;
    Ok(cell)
}

fn evaluate_split<T: Scalar>(
    split: &Split<'_>,
    spec: &ClassifierSpec,
    settings: &CvSettings,
) -> Result<(Metrics, Vec<String>), EvalError> {
    let tokens = |docs: &[&Document]| -> Vec<Vec<String>> { docs.iter().map(|d| tokenize(&d.normalized())).collect() };
    let train_tokens = tokens(&split.train);
    let test_tokens = tokens(&split.test);
    let tfidf = TfidfModel::<T>::fit(&train_tokens, settings.tfidf)?;
    let x_train = tfidf.transform_all(&train_tokens);
    let x_test = tfidf.transform_all(&test_tokens);
    let y_train: Vec<Label> = split.train.iter().map(|d| d.label).collect();
    let y_test: Vec<Label> = split.test.iter().map(|d| d.label).collect();
    let mut fold_spec = *spec;
    fold_spec.seed = crate::providers::derive_seed(spec.seed, &[b"fold", &(split.fold as u64).to_le_bytes()]);
    let fit = models::fit(&fold_spec, &x_train, &y_train)?;
    let predictions = fit.model.predict_all(&x_test)?;
    let warnings = fit
        .warnings
        .into_iter()
        .map(|w| format!("fold {}: {w}", split.fold))
        .collect();
    Ok((compute_metrics(&predictions, &y_test)?, warnings))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub cv_mode: CvMode,
    pub k: usize,
    pub seed: u64,
    pub cells: Vec<EvalCell>,
}

/// Evaluates every (dataset, model) pair. Datasets are given as optional
/// augmentation batches; `None` is the original-only configuration.
pub fn evaluate_grid<T: Scalar>(
    original: &Corpus,
    datasets: &[Option<&AugmentationBatch>],
    specs: &[ClassifierSpec],
    settings: &CvSettings,
) -> Result<EvalReport, EvalError> {
    let pairs: Vec<(Option<&AugmentationBatch>, &ClassifierSpec)> =
        datasets.iter().flat_map(|d| specs.iter().map(move |s| (*d, s))).collect();
    let cells: Result<Vec<EvalCell>, EvalError> = pairs
        .par_iter()
        .map(|(d, s)| cross_validate::<T>(original, *d, s, settings))
        .collect();
    Ok(EvalReport {
        cv_mode: settings.cv_mode,
        k: settings.k,
        seed: settings.seed,
        cells: cells?,
    })
}

impl EvalReport {
    pub fn cell(&self, dataset: &str, model: ClassifierKind) -> Option<&EvalCell> {
        self.cells.iter().find(|c| c.dataset == dataset && c.model == model)
    }

    pub fn datasets(&self) -> Vec<&str> {
        let mut out: Vec<&str> = Vec::new();
        for c in &self.cells {
            if !out.contains(&c.dataset.as_str()) {
                out.push(&c.dataset);
            }
        }
        out
    }

    /// Table with columns Dataset / Model / Accuracy / Accuracy Std /
    /// F1-Score / F1-Score Std, where F1 is macro-averaged. The dataset name
    /// is printed on the first row of its group only.
    pub fn to_markdown(&self) -> String {
        let mut out = String::new();
        out.push_str("| Dataset | Model | Accuracy | Accuracy Std | F1-Score | F1-Score Std |\n");
        out.push_str("|---|---|---|---|---|---|\n");
        let mut previous: Option<&str> = None;
        for c in &self.cells {
            let name = if previous == Some(c.dataset.as_str()) { "" } else { &c.dataset };
            previous = Some(&c.dataset);
            let _ = writeln!(
                out,
                "| {} | {} | {:.3} | {:.3} | {:.3} | {:.3} |",
                name,
                c.model.display_name(),
                c.mean.accuracy,
                c.std.accuracy,
                c.mean.f1_macro,
                c.std.f1_macro
            );
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GapRow {
    pub dataset: String,
    pub model: ClassifierKind,
    pub accuracy: f64,
    pub f1: f64,
    pub gap: f64,
    pub flagged: bool,
}

/// `accuracy - f1` and whether it exceeds [`GAP_THRESHOLD`].
pub fn gap(accuracy: f64, f1: f64) -> (f64, bool) {
    let g = accuracy - f1;
    (g, g > GAP_THRESHOLD)
}

/// Accuracy minus macro-F1 for every cell of the report.
pub fn gap_analysis(report: &EvalReport) -> Result<Vec<GapRow>, EvalError> {
    if report.cells.is_empty() {
        return Err(EvalError::EmptyReport);
    }
    Ok(report
        .cells
        .iter()
        .map(|c| {
            let (g, flagged) = gap(c.mean.accuracy, c.mean.f1_macro);
            GapRow {
                dataset: c.dataset.clone(),
                model: c.model,
                accuracy: c.mean.accuracy,
                f1: c.mean.f1_macro,
                gap: g,
                flagged,
            }
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use Label::{Negative as N, Positive as P};

    #[test]
    fn balanced_folds_are_exact() {
        let labels: Vec<Label> = (0..20).map(|i| if i < 10 { P } else { N }).collect();
        let f = stratified_kfold(&labels, 5, 1).unwrap();
        for fold in 0..5 {
            let idx = f.test_indices(fold);
            let pos = idx.iter().filter(|&&i| labels[i] == P).count();
            assert_eq!((idx.len(), pos), (4, 2));
        }
        assert_eq!(f, stratified_kfold(&labels, 5, 1).unwrap());
        assert_ne!(f, stratified_kfold(&labels, 5, 2).unwrap());
    }

    #[test]
    fn table_sized_folds() {
        let labels: Vec<Label> = (0..918).map(|i| if i < 306 { P } else { N }).collect();
        let f = stratified_kfold(&labels, 5, 9).unwrap();
        for fold in 0..5 {
            let idx = f.test_indices(fold);
            let pos = idx.iter().filter(|&&i| labels[i] == P).count();
            assert!((61..=62).contains(&pos));
            assert!((122..=123).contains(&(idx.len() - pos)));
        }
    }

    #[test]
    fn kfold_errors() {
        assert!(matches!(stratified_kfold(&[P, N], 1, 0), Err(EvalError::InvalidK(1))));
        assert!(matches!(
            stratified_kfold(&[P, N], 3, 0),
            Err(EvalError::TooFewDocuments { n: 2, k: 3 })
        ));
    }

    #[test]
    fn metric_cases() {
        let m = compute_metrics(&[P, N, P], &[P, N, P]).unwrap();
        assert_eq!((m.accuracy, m.f1_macro, m.f1_positive), (1.0, 1.0, 1.0));

        let m = compute_metrics(&[P, P, N, N], &[P, N, N, P]).unwrap();
        assert_eq!(m.confusion, Confusion { tp: 1, fp: 1, fn_: 1, tn: 1 });
        assert_eq!((m.accuracy, m.f1_positive, m.f1_macro), (0.5, 0.5, 0.5));

        let m = compute_metrics(&[N, N, N], &[N, N, N]).unwrap();
        assert_eq!((m.accuracy, m.f1_positive, m.f1_macro), (1.0, 0.0, 0.5));

        assert!(matches!(compute_metrics(&[P], &[P, N]), Err(EvalError::LengthMismatch { .. })));
        assert!(matches!(compute_metrics(&[], &[]), Err(EvalError::EmptyInput)));
    }

    #[test]
    fn summary_statistics() {
        assert_eq!(mean(&[1.0, 2.0, 3.0]), 2.0);
        assert_eq!(sample_std(&[1.0, 2.0, 3.0]), 1.0);
        assert_eq!(sample_std(&[4.0]), 0.0);
    }

    #[test]
    fn gap_cases() {
        let (g, flagged) = gap(0.798, 0.590);
        assert!((g - 0.208).abs() < 1e-12);
        assert!(flagged);
        assert_eq!(gap(0.8, 0.8), (0.0, false));
        assert!(matches!(
            gap_analysis(&EvalReport {
                cv_mode: CvMode::Mixed,
                k: 5,
                seed: 0,
                cells: vec![]
            }),
            Err(EvalError::EmptyReport)
        ));
    }

    #[test]
    fn markdown_groups_dataset_names() {
        let m = compute_metrics(&[P, N], &[P, N]).unwrap();
        let report = EvalReport {
            cv_mode: CvMode::HoldoutOriginal,
            k: 2,
            seed: 0,
            cells: vec![
                EvalCell::from_folds("Original", ClassifierKind::LogReg, vec![m, m]),
                EvalCell::from_folds("Original", ClassifierKind::NaiveBayes, vec![m, m]),
            ],
        };
        let md = report.to_markdown();
        let lines: Vec<&str> = md.lines().collect();
        assert_eq!(lines[0], "| Dataset | Model | Accuracy | Accuracy Std | F1-Score | F1-Score Std |");
        assert_eq!(lines[2], "| Original | Logistic Regression | 1.000 | 0.000 | 1.000 | 0.000 |");
        assert_eq!(lines[3], "|  | Naive Bayes | 1.000 | 0.000 | 1.000 | 0.000 |");
    }

    #[test]
    fn dataset_names() {
        assert_eq!(dataset_name(None), "Original");
        assert_eq!(dataset_name(Some(Source::DualClassGen)), "Dual-class prompt generation");
    }
}
