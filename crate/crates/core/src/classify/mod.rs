//! Base classifiers that expose per-class posterior probabilities.

mod dataset;
pub mod forest;
pub mod lda;

use serde::{Deserialize, Serialize};

pub use dataset::{ClassList, Dataset};
pub use forest::{ForestModel, ForestParams};
pub use lda::{LdaModel, DEFAULT_RIDGE};

use crate::error::{Error, Result};

/// Per-class scores aligned with a [`ClassList`], summing to one.
#[derive(Debug, Clone, PartialEq)]
pub struct PosteriorVector(pub Vec<f64>);

impl PosteriorVector {
    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn argmax(&self) -> usize {
        argmax(&self.0)
    }
}

/// Index of the largest entry; ties go to the lowest index.
pub fn argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in values.iter().enumerate().skip(1) {
        if v > values[best] {
            best = i;
        }
    }
    best
}

pub fn predict_label<'a>(p: &PosteriorVector, class_list: &'a ClassList) -> &'a str {
    class_list.name(p.argmax())
}

/// Which base classifier to fit, with its hyperparameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum ClassifierConfig {
    Lda { ridge: f64 },
    Rf(ForestParams),
}

impl Default for ClassifierConfig {
    fn default() -> Self {
        ClassifierConfig::Lda { ridge: DEFAULT_RIDGE }
    }
}

impl ClassifierConfig {
    pub fn fit(&self, data: &Dataset) -> Result<TrainedClassifier> {
        match self {
            ClassifierConfig::Lda { ridge } => Ok(TrainedClassifier::Lda(LdaModel::fit(data, *ridge)?)),
            ClassifierConfig::Rf(params) => Ok(TrainedClassifier::Forest(ForestModel::fit(data, params)?)),
        }
    }

    /// Same classifier with the forest seed replaced (no-op for LDA).
    pub fn with_seed(&self, seed: u64) -> Self {
        match self {
            ClassifierConfig::Rf(p) => ClassifierConfig::Rf(ForestParams { seed, ..p.clone() }),
            other => other.clone(),
        }
    }
}

/// A fitted model of either kind.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum TrainedClassifier {
    Lda(LdaModel),
    Forest(ForestModel),
}

impl TrainedClassifier {
    pub fn posteriors(&self, x: &[f64]) -> Result<PosteriorVector> {
        match self {
            TrainedClassifier::Lda(m) => m.posteriors(x),
            TrainedClassifier::Forest(m) => m.posteriors(x),
        }
    }

    pub fn class_list(&self) -> &ClassList {
        match self {
            TrainedClassifier::Lda(m) => m.class_list(),
            TrainedClassifier::Forest(m) => m.class_list(),
        }
    }

    pub fn predict(&self, x: &[f64]) -> Result<usize> {
        Ok(self.posteriors(x)?.argmax())
    }
}

/// On-disk model envelope version.
pub const MODEL_FORMAT_VERSION: u32 = 1;

#[derive(Serialize, Deserialize)]
struct ModelFile {
    format_version: u32,
    model: TrainedClassifier,
}

impl TrainedClassifier {
    pub fn to_json(&self) -> Result<String> {
        serde_json::to_string(&ModelFile {
            format_version: MODEL_FORMAT_VERSION,
            model: self.clone(),
        })
        .map_err(|e| Error::ModelFormat(e.to_string()))
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let file: ModelFile = serde_json::from_str(s).map_err(|e| Error::ModelFormat(e.to_string()))?;
        if file.format_version != MODEL_FORMAT_VERSION {
            return Err(Error::ModelFormat(format!(
                "unsupported model version {}",
                file.format_version
            )));
        }
        Ok(file.model)
    }
}
