//! Binary classifiers for sleep quality and their evaluation.
//!
//! Class `1` is the positive class (poor sleep efficiency). Every model
//! produces a score in `[0, 1]` that increases with the likelihood of class 1.

pub mod adaboost;
pub mod cv;
pub mod eval;
pub mod forest;
pub mod logreg;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use adaboost::{AdaBoostConfig, AdaBoostModel};
pub use cv::{cross_validate, stratified_folds, CvReport};
pub use eval::{evaluate, f1_score, Confusion, EvalReport, RocPoint};
pub use forest::{ForestConfig, ForestModel};
pub use logreg::{LogRegConfig, LogRegModel};

#[derive(Debug, Error, PartialEq)]
pub enum ModelError {
    #[error("training labels contain a single class")]
    ClassCollapse,
    #[error("expected {expected} features per row, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("feature matrix and labels have different lengths ({rows} vs {labels})")]
    LengthMismatch { rows: usize, labels: usize },
    #[error("labels must be 0 or 1")]
    BadLabel,
    #[error("AUC needs both classes in the evaluation labels")]
    SingleClassAUC,
    #[error("class {class} has {count} members, fewer than {folds} folds")]
    TooFewPerClass { class: u8, count: usize, folds: usize },
    #[error("fold count must be at least 2")]
    BadFolds,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ModelKind {
    #[serde(rename = "logreg")]
    LogReg,
    #[serde(rename = "adaboost")]
    AdaBoost,
    #[serde(rename = "rf")]
    RandomForest,
}

impl ModelKind {
    pub fn as_str(self) -> &'static str {
        match self {
            Self::LogReg => "logreg",
            Self::AdaBoost => "adaboost",
            Self::RandomForest => "rf",
        }
    }
}

impl fmt::Display for ModelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ModelKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "logreg" => Ok(Self::LogReg),
            "adaboost" => Ok(Self::AdaBoost),
            "rf" | "random_forest" => Ok(Self::RandomForest),
            other => Err(format!("unknown model `{other}`")),
        }
    }
}

/// Hyperparameters for every model kind plus the training seed.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct ModelConfig {
    pub logreg: LogRegConfig,
    pub adaboost: AdaBoostConfig,
    pub forest: ForestConfig,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum TrainedModel {
    #[serde(rename = "logreg")]
    LogReg(LogRegModel),
    #[serde(rename = "adaboost")]
    AdaBoost(AdaBoostModel),
    #[serde(rename = "rf")]
    RandomForest(ForestModel),
}

impl TrainedModel {
    pub fn kind(&self) -> ModelKind {
        match self {
            Self::LogReg(_) => ModelKind::LogReg,
            Self::AdaBoost(_) => ModelKind::AdaBoost,
            Self::RandomForest(_) => ModelKind::RandomForest,
        }
    }

    pub fn n_features(&self) -> usize {
        match self {
            Self::LogReg(m) => m.weights.len(),
            Self::AdaBoost(m) => m.n_features,
            Self::RandomForest(m) => m.n_features,
        }
    }

    fn score_row(&self, x: &[f64]) -> f64 {
        match self {
            Self::LogReg(m) => m.score(x),
            Self::AdaBoost(m) => m.score(x),
            Self::RandomForest(m) => m.score(x),
        }
    }
}

pub fn train(kind: ModelKind, x: &[Vec<f64>], y: &[u8], cfg: &ModelConfig) -> Result<TrainedModel, ModelError> {
    Ok(match kind {
        ModelKind::LogReg => TrainedModel::LogReg(logreg::train_logreg(x, y, &cfg.logreg)?),
        ModelKind::AdaBoost => TrainedModel::AdaBoost(adaboost::train_adaboost(x, y, &cfg.adaboost)?),
        ModelKind::RandomForest => {
            TrainedModel::RandomForest(forest::train_random_forest(x, y, &cfg.forest, cfg.seed)?)
        }
    })
}

/// One score per row of `x`.
pub fn predict_scores(model: &TrainedModel, x: &[Vec<f64>]) -> Result<Vec<f64>, ModelError> {
    let d = model.n_features();
    if let Some(bad) = x.iter().find(|r| r.len() != d) {
        return Err(ModelError::DimensionMismatch {
            expected: d,
            found: bad.len(),
        });
    }
    Ok(x.iter().map(|r| model.score_row(r)).collect())
}

/// Shape and label checks shared by the trainers. Returns the feature count.
pub(crate) fn check_training_data(x: &[Vec<f64>], y: &[u8]) -> Result<usize, ModelError> {
    if x.len() != y.len() {
        return Err(ModelError::LengthMismatch {
            rows: x.len(),
            labels: y.len(),
        });
    }
    if y.iter().any(|&v| v > 1) {
        return Err(ModelError::BadLabel);
    }
    let d = x.first().map_or(0, Vec::len);
    if let Some(bad) = x.iter().find(|r| r.len() != d) {
        return Err(ModelError::DimensionMismatch {
            expected: d,
            found: bad.len(),
        });
    }
    let positives = y.iter().filter(|&&v| v == 1).count();
    if positives == 0 || positives == y.len() {
        return Err(ModelError::ClassCollapse);
    }
    Ok(d)
}

pub(crate) fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}
