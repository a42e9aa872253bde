use serde::{Deserialize, Serialize};

use crate::classify::{ClassList, Dataset};
use crate::error::{Error, Result};

/// Tolerance on the sum of a prior vector.
pub const PRIOR_SUM_TOLERANCE: f64 = 1e-9;

/// Class proportions for one region.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassPriors {
    region_id: String,
    classes: Vec<String>,
    proportions: Vec<f64>,
}

impl ClassPriors {
    pub fn new<S: Into<String>>(
        region_id: impl Into<String>,
        entries: impl IntoIterator<Item = (S, f64)>,
    ) -> Result<Self> {
        let (classes, proportions): (Vec<String>, Vec<f64>) =
            entries.into_iter().map(|(c, p)| (c.into(), p)).unzip();
        let region_id = region_id.into();
        if classes.is_empty() {
            return Err(Error::InvalidPriors(format!("region {region_id}: no classes")));
        }
        for (i, c) in classes.iter().enumerate() {
            if classes[..i].contains(c) {
                return Err(Error::InvalidPriors(format!("region {region_id}: duplicate class {c}")));
            }
        }
        if proportions.iter().any(|p| !p.is_finite() || *p < 0.0) {
            return Err(Error::InvalidPriors(format!(
                "region {region_id}: proportions must be finite and nonnegative"
            )));
        }
        let sum: f64 = proportions.iter().sum();
        if (sum - 1.0).abs() > PRIOR_SUM_TOLERANCE {
            return Err(Error::InvalidPriors(format!(
                "region {region_id}: proportions sum to {sum}"
            )));
        }
        Ok(ClassPriors { region_id, classes, proportions })
    }

    /// Priors proportional to nonnegative weights (counts, areas).
    pub fn from_weights<S: Into<String>>(
        region_id: impl Into<String>,
        entries: impl IntoIterator<Item = (S, f64)>,
    ) -> Result<Self> {
        let entries: Vec<(String, f64)> = entries.into_iter().map(|(c, w)| (c.into(), w)).collect();
        let total: f64 = entries.iter().map(|e| e.1).sum();
        if !(total > 0.0) || !total.is_finite() {
            return Err(Error::InvalidPriors("weights must have a positive finite sum".into()));
        }
        ClassPriors::new(region_id, entries.into_iter().map(|(c, w)| (c, w / total)))
    }

    /// Empirical label frequencies of a dataset.
    pub fn empirical(region_id: impl Into<String>, data: &Dataset) -> Self {
        let n = data.len() as f64;
        let counts = data.class_counts();
        ClassPriors {
            region_id: region_id.into(),
            classes: data.class_list().names().to_vec(),
            proportions: counts.iter().map(|&c| c as f64 / n).collect(),
        }
    }

    pub fn region_id(&self) -> &str {
        &self.region_id
    }

    pub fn classes(&self) -> &[String] {
        &self.classes
    }

    pub fn proportions(&self) -> &[f64] {
        &self.proportions
    }

    pub fn get(&self, class: &str) -> Option<f64> {
        self.classes.iter().position(|c| c == class).map(|i| self.proportions[i])
    }

    /// Proportions reordered to `class_list`; the class sets must coincide.
    pub fn aligned(&self, class_list: &ClassList) -> Result<Vec<f64>> {
        if self.classes.len() != class_list.len() {
            return Err(Error::ClassMismatch(format!(
                "priors for {} list {} classes, expected {}",
                self.region_id,
                self.classes.len(),
                class_list.len()
            )));
        }
        class_list
            .names()
            .iter()
            .map(|name| {
                self.get(name).ok_or_else(|| {
                    Error::ClassMismatch(format!("priors for {} lack class {name}", self.region_id))
                })
            })
            .collect()
    }
}
