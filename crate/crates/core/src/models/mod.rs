//! Binary classifiers over sparse feature vectors behind one contract:
//! logistic regression, multinomial naive Bayes, random forest and
//! second-order gradient-boosted trees.

mod forest;
mod gbt;
mod logreg;
mod naive_bayes;
pub mod tree;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use forest::{ForestParams, RandomForestModel};
pub use gbt::{GbtModel, GbtParams};
pub use logreg::{loss_and_gradient, LogRegModel, LogRegParams};
pub use naive_bayes::{NaiveBayesModel, NaiveBayesParams};

use crate::corpus::Label;
use crate::features::SparseVector;
use crate::scalar::{sigmoid, Scalar};

#[derive(Debug, Error)]
pub enum ModelError {
    #[error("training set is empty or has fewer than two rows")]
    TooFewRows,
    #[error("{features} feature rows but {labels} labels")]
    LengthMismatch { features: usize, labels: usize },
    #[error("feature dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("invalid hyperparameters: {0}")]
    InvalidHyperparams(String),
    #[error("malformed model container: {0}")]
    Malformed(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum ClassifierKind {
    #[serde(rename = "logreg")]
    LogReg,
    #[serde(rename = "naive_bayes")]
    NaiveBayes,
    #[serde(rename = "random_forest")]
    RandomForest,
    #[serde(rename = "gbt")]
    GradientBoostedTrees,
}

impl ClassifierKind {
    pub const ALL: [ClassifierKind; 4] = [
        ClassifierKind::LogReg,
        ClassifierKind::NaiveBayes,
        ClassifierKind::RandomForest,
        ClassifierKind::GradientBoostedTrees,
    ];

    pub fn display_name(self) -> &'static str {
        match self {
            ClassifierKind::LogReg => "Logistic Regression",
            ClassifierKind::NaiveBayes => "Naive Bayes",
            ClassifierKind::RandomForest => "Random Forest",
            ClassifierKind::GradientBoostedTrees => "Gradient Boosted Trees",
        }
    }

    pub fn slug(self) -> &'static str {
        match self {
            ClassifierKind::LogReg => "logreg",
            ClassifierKind::NaiveBayes => "naive_bayes",
            ClassifierKind::RandomForest => "random_forest",
            ClassifierKind::GradientBoostedTrees => "gbt",
        }
    }
}

impl fmt::Display for ClassifierKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.display_name())
    }
}

impl FromStr for ClassifierKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().replace(['-', ' '], "_").as_str() {
            "logreg" | "logistic_regression" | "lr" => Ok(ClassifierKind::LogReg),
            "naive_bayes" | "nb" => Ok(ClassifierKind::NaiveBayes),
            "random_forest" | "rf" => Ok(ClassifierKind::RandomForest),
            "gbt" | "xgboost" | "gradient_boosted_trees" => Ok(ClassifierKind::GradientBoostedTrees),
            other => Err(format!("unknown model {other:?}")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "hyperparams")]
pub enum Hyperparams {
    #[serde(rename = "logreg")]
    LogReg(LogRegParams),
    #[serde(rename = "naive_bayes")]
    NaiveBayes(NaiveBayesParams),
    #[serde(rename = "random_forest")]
    RandomForest(ForestParams),
    #[serde(rename = "gbt")]
    GradientBoostedTrees(GbtParams),
}

impl Hyperparams {
    pub fn default_for(kind: ClassifierKind) -> Self {
        match kind {
            ClassifierKind::LogReg => Hyperparams::LogReg(Default::default()),
            ClassifierKind::NaiveBayes => Hyperparams::NaiveBayes(Default::default()),
            ClassifierKind::RandomForest => Hyperparams::RandomForest(Default::default()),
            ClassifierKind::GradientBoostedTrees => Hyperparams::GradientBoostedTrees(Default::default()),
        }
    }

    pub fn kind(&self) -> ClassifierKind {
        match self {
            Hyperparams::LogReg(_) => ClassifierKind::LogReg,
            Hyperparams::NaiveBayes(_) => ClassifierKind::NaiveBayes,
            Hyperparams::RandomForest(_) => ClassifierKind::RandomForest,
            Hyperparams::GradientBoostedTrees(_) => ClassifierKind::GradientBoostedTrees,
        }
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        match self {
            Hyperparams::LogReg(p) => p.validate(),
            Hyperparams::NaiveBayes(p) => p.validate(),
            Hyperparams::RandomForest(p) => p.validate(),
            Hyperparams::GradientBoostedTrees(p) => p.validate(),
        }
    }
}

/// Model kind, validated hyperparameters and seed.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClassifierSpec {
    #[serde(flatten)]
    hyperparams: Hyperparams,
    pub seed: u64,
}

impl ClassifierSpec {
    pub fn new(hyperparams: Hyperparams, seed: u64) -> Result<Self, ModelError> {
        hyperparams.validate()?;
        Ok(ClassifierSpec { hyperparams, seed })
    }

    pub fn default_for(kind: ClassifierKind, seed: u64) -> Self {
        ClassifierSpec {
            hyperparams: Hyperparams::default_for(kind),
            seed,
        }
    }

    pub fn kind(&self) -> ClassifierKind {
        self.hyperparams.kind()
    }

    pub fn hyperparams(&self) -> &Hyperparams {
        &self.hyperparams
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum FittedModel<T> {
    LogReg(LogRegModel<T>),
    NaiveBayes(NaiveBayesModel<T>),
    RandomForest(RandomForestModel<T>),
    GradientBoostedTrees(GbtModel<T>),
}

/// A fitted model plus any warnings raised while fitting.
#[derive(Debug, Clone)]
pub struct Fit<T> {
    pub model: TrainedClassifier<T>,
    pub warnings: Vec<String>,
}

/// A fitted model bundled with the spec that produced it.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainedClassifier<T> {
    spec: ClassifierSpec,
    dim: usize,
    model: FittedModel<T>,
}

/// `log(1 + e^z) - y z`, stable for large `|z|`.
pub(crate) fn log_loss<T: Scalar>(z: T, y: T) -> T {
    let softplus = z.max(T::zero()) + (-z.abs()).exp().ln_1p();
    softplus - y * z
}

/// Fits `spec` on `(x, y)`. Deterministic given `spec.seed`.
pub fn fit<T: Scalar>(spec: &ClassifierSpec, x: &[SparseVector<T>], y: &[Label]) -> Result<Fit<T>, ModelError> {
    if x.len() != y.len() {
        return Err(ModelError::LengthMismatch {
            features: x.len(),
            labels: y.len(),
        });
    }
    if x.len() < 2 {
        return Err(ModelError::TooFewRows);
    }
    let dim = x[0].dim();
    if let Some(bad) = x.iter().find(|r| r.dim() != dim) {
        return Err(ModelError::DimensionMismatch {
            expected: dim,
            got: bad.dim(),
        });
    }
    spec.hyperparams.validate()?;
    let yi: Vec<usize> = y.iter().map(|l| l.as_index()).collect();
    let mut warnings = Vec::new();
    let positives = yi.iter().filter(|&&c| c == 1).count();
    if positives == 0 || positives == yi.len() {
        let msg = format!(
            "{}: training set contains a single class; the model will predict it for every input",
            spec.kind().display_name()
        );
        log::warn!("{msg}");
        warnings.push(msg);
    }
    let model = match &spec.hyperparams {
        Hyperparams::LogReg(p) => FittedModel::LogReg(LogRegModel::fit(p, x, &yi)),
        Hyperparams::NaiveBayes(p) => FittedModel::NaiveBayes(NaiveBayesModel::fit(p, x, &yi)),
        Hyperparams::RandomForest(p) => FittedModel::RandomForest(RandomForestModel::fit(p, x, &yi, spec.seed)),
        Hyperparams::GradientBoostedTrees(p) => FittedModel::GradientBoostedTrees(GbtModel::fit(p, x, &yi)),
    };
    Ok(Fit {
        model: TrainedClassifier {
            spec: *spec,
            dim,
            model,
        },
        warnings,
    })
}

impl<T: Scalar> TrainedClassifier<T> {
    pub fn from_parts(spec: ClassifierSpec, dim: usize, model: FittedModel<T>) -> Self {
        TrainedClassifier { spec, dim, model }
    }

    pub fn spec(&self) -> &ClassifierSpec {
        &self.spec
    }

    pub fn kind(&self) -> ClassifierKind {
        self.spec.kind()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn model(&self) -> &FittedModel<T> {
        &self.model
    }

    fn check_dim(&self, x: &SparseVector<T>) -> Result<(), ModelError> {
        if x.dim() != self.dim {
            return Err(ModelError::DimensionMismatch {
                expected: self.dim,
                got: x.dim(),
            });
        }
        Ok(())
    }

    /// Probability of Positive; for the forest, the fraction of trees
    /// voting Positive.
    pub fn predict_proba(&self, x: &SparseVector<T>) -> Result<T, ModelError> {
        self.check_dim(x)?;
        Ok(match &self.model {
            FittedModel::LogReg(m) => sigmoid(m.decision(x)),
            FittedModel::NaiveBayes(m) => m.posterior(x)[1],
            FittedModel::RandomForest(m) => m.vote_fraction(x),
            FittedModel::GradientBoostedTrees(m) => sigmoid(m.margin(x)),
        })
    }

    /// Positive only when strictly more likely than not; ties go Negative.
    pub fn predict(&self, x: &SparseVector<T>) -> Result<Label, ModelError> {
        let p = self.predict_proba(x)?;
        Ok(if p > T::of(0.5) { Label::Positive } else { Label::Negative })
    }

    pub fn predict_all(&self, xs: &[SparseVector<T>]) -> Result<Vec<Label>, ModelError> {
        xs.iter().map(|x| self.predict(x)).collect()
    }

    /// Self-describing container `{kind, hyperparams, parameters}`.
    pub fn to_json(&self) -> serde_json::Value {
        let parameters = match &self.model {
            FittedModel::LogReg(m) => serde_json::to_value(m),
            FittedModel::NaiveBayes(m) => serde_json::to_value(m),
            FittedModel::RandomForest(m) => serde_json::to_value(m),
            FittedModel::GradientBoostedTrees(m) => serde_json::to_value(m),
        }
        .expect("model parameters serialize");
        let spec = serde_json::to_value(self.spec).expect("spec serializes");
        serde_json::json!({
            "kind": spec["kind"],
            "hyperparams": spec["hyperparams"],
            "seed": self.spec.seed,
            "dim": self.dim,
            "parameters": parameters,
        })
    }

    pub fn from_json(value: &serde_json::Value) -> Result<Self, ModelError> {
        let bad = |e: serde_json::Error| ModelError::Malformed(e.to_string());
        let spec: ClassifierSpec = serde_json::from_value(serde_json::json!({
            "kind": value["kind"],
            "hyperparams": value["hyperparams"],
            "seed": value["seed"],
        }))
        .map_err(bad)?;
        let dim = value["dim"]
            .as_u64()
            .ok_or_else(|| ModelError::Malformed("missing dim".into()))? as usize;
        let p = value["parameters"].clone();
        let model = match spec.kind() {
            ClassifierKind::LogReg => FittedModel::LogReg(serde_json::from_value(p).map_err(bad)?),
            ClassifierKind::NaiveBayes => FittedModel::NaiveBayes(serde_json::from_value(p).map_err(bad)?),
            ClassifierKind::RandomForest => FittedModel::RandomForest(serde_json::from_value(p).map_err(bad)?),
            ClassifierKind::GradientBoostedTrees => {
                FittedModel::GradientBoostedTrees(serde_json::from_value(p).map_err(bad)?)
            }
        };
        Ok(TrainedClassifier { spec, dim, model })
    }
}
