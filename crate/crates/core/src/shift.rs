//! Prior shift and feature shift adjustment.
//!
//! Prior shift adjustment reweights a classifier's posteriors by the ratio of
//! target-region to training-region class prevalence. Feature shift adjustment
//! assumes class-and-region means decompose additively into a regional offset
//! plus a class effect, estimates the target region's offset from its unlabeled
//! feature mean and known class proportions, and subtracts it before
//! classifying. Applying both gives the combined adjustment.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::classify::{ClassList, Dataset, PosteriorVector, TrainedClassifier};
use crate::error::{Error, Result};
use crate::priors::ClassPriors;

/// Reweights `p` by `test_k / train_k` and renormalizes.
pub fn psa_reweight(
    p: &PosteriorVector,
    class_list: &ClassList,
    train_priors: &ClassPriors,
    test_priors: &ClassPriors,
) -> Result<PosteriorVector> {
    let train = train_priors.aligned(class_list)?;
    let test = test_priors.aligned(class_list)?;
    if p.0.len() != class_list.len() {
        return Err(Error::ClassMismatch(format!(
            "posterior has {} entries for {} classes",
            p.0.len(),
            class_list.len()
        )));
    }
    if let Some(k) = train.iter().position(|&t| !(t > 0.0)) {
        return Err(Error::ZeroTrainPrior(class_list.name(k).to_string()));
    }
    psa_reweight_aligned(&p.0, &train, &test)
}

/// [`psa_reweight`] on prior vectors already in class order.
pub fn psa_reweight_aligned(p: &[f64], train: &[f64], test: &[f64]) -> Result<PosteriorVector> {
    if train.len() != p.len() || test.len() != p.len() {
        return Err(Error::ClassMismatch("prior and posterior lengths differ".into()));
    }
    if let Some(k) = train.iter().position(|&t| !(t > 0.0)) {
        return Err(Error::ZeroTrainPrior(format!("class index {k}")));
    }
    let weighted: Vec<f64> = p
        .iter()
        .zip(train.iter().zip(test))
        // ratio first, so equal priors give a weight of exactly 1
        .map(|(pk, (tr, te))| pk * (te / tr))
        .collect();
    let total: f64 = weighted.iter().sum();
    if !(total > 0.0) {
        return Err(Error::AllZeroScores);
    }
    Ok(PosteriorVector(weighted.into_iter().map(|w| w / total).collect()))
}

/// Per-class training-region feature means, one row per class.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassMeans {
    pub class_list: ClassList,
    pub means: Vec<Vec<f64>>,
}

impl ClassMeans {
    pub fn dim(&self) -> usize {
        self.means[0].len()
    }
}

pub fn estimate_class_means(train: &Dataset) -> Result<ClassMeans> {
    let k = train.n_classes();
    let d = train.dim();
    let mut sums = vec![vec![0.0; d]; k];
    let counts = train.class_counts();
    if let Some(empty) = counts.iter().position(|&c| c == 0) {
        return Err(Error::EmptyClass(train.class_list().name(empty).to_string()));
    }
    for (row, &l) in train.rows().iter().zip(train.labels()) {
        for (s, v) in sums[l].iter_mut().zip(row) {
            *s += v;
        }
    }
    for (s, &c) in sums.iter_mut().zip(&counts) {
        s.iter_mut().for_each(|v| *v /= c as f64);
    }
    Ok(ClassMeans { class_list: train.class_list().clone(), means: sums })
}

/// Estimated additive offset of one region relative to the training region.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegionalShift {
    pub region_id: String,
    pub offset: Vec<f64>,
}

impl RegionalShift {
    /// The training region's own shift.
    pub fn zero(region_id: impl Into<String>, d: usize) -> Self {
        RegionalShift { region_id: region_id.into(), offset: vec![0.0; d] }
    }

    pub fn negate(&self) -> Self {
        RegionalShift {
            region_id: self.region_id.clone(),
            offset: self.offset.iter().map(|v| -v).collect(),
        }
    }
}

/// `offset = test_mean − Σ_k test_prior_k · mean_k`.
pub fn estimate_regional_shift(
    test_feature_mean: &[f64],
    test_priors: &ClassPriors,
    means: &ClassMeans,
) -> Result<RegionalShift> {
    let p = test_priors.aligned(&means.class_list)?;
    let d = means.dim();
    if test_feature_mean.len() != d {
        return Err(Error::DimensionMismatch { expected: d, got: test_feature_mean.len() });
    }
    let mut offset = test_feature_mean.to_vec();
    for (pk, mk) in p.iter().zip(&means.means) {
        for (o, m) in offset.iter_mut().zip(mk) {
            *o -= pk * m;
        }
    }
    Ok(RegionalShift { region_id: test_priors.region_id().to_string(), offset })
}

pub fn fsa_transform(x: &[f64], shift: &RegionalShift) -> Result<Vec<f64>> {
    if x.len() != shift.offset.len() {
        return Err(Error::DimensionMismatch { expected: shift.offset.len(), got: x.len() });
    }
    Ok(x.iter().zip(&shift.offset).map(|(a, b)| a - b).collect())
}

/// Label index from prior-reweighted posteriors of the shift-corrected features.
pub fn fpsa_classify(
    model: &TrainedClassifier,
    x: &[f64],
    shift: &RegionalShift,
    train_priors: &ClassPriors,
    test_priors: &ClassPriors,
) -> Result<usize> {
    let corrected = fsa_transform(x, shift)?;
    let p = model.posteriors(&corrected)?;
    Ok(psa_reweight(&p, model.class_list(), train_priors, test_priors)?.argmax())
}

/// Input to [`aggregate_to_priors`] for one class.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ClassArea {
    /// Aggregate area (or a direct count when `mean_field_area` is 1).
    pub area: f64,
    pub mean_field_area: f64,
}

/// Converts aggregate class areas to class proportions of fields.
///
/// Each class contributes `area / mean_field_area` fields. Pixel-level
/// priors are obtained by passing unit mean field areas.
pub fn aggregate_to_priors(region_id: &str, areas: &BTreeMap<String, ClassArea>) -> Result<ClassPriors> {
    let mut counts = Vec::with_capacity(areas.len());
    for (class, a) in areas {
        if !(a.area >= 0.0) || !a.area.is_finite() {
            return Err(Error::InvalidPriors(format!("class {class}: area must be nonnegative")));
        }
        let count = if a.area == 0.0 {
            0.0
        } else if !(a.mean_field_area > 0.0) || !a.mean_field_area.is_finite() {
            return Err(Error::ZeroMeanFieldArea(class.clone()));
        } else {
            a.area / a.mean_field_area
        };
        counts.push((class.clone(), count));
    }
    if !counts.iter().any(|c| c.1 > 0.0) {
        return Err(Error::AllZeroAreas);
    }
    ClassPriors::from_weights(region_id, counts)
}
