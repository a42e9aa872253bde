use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use super::metrics::{metrics, ConfusionMatrix, MetricsReport};
use crate::baselines::{
    major_class_classify, pipeline_smote_psa, pipeline_zt_fpsa, pipeline_zt_smote_fpsa, DEFAULT_SMOTE_K,
};
use crate::classify::{ClassifierConfig, Dataset, TrainedClassifier};
use crate::error::{Error, Result};
use crate::priors::ClassPriors;
use crate::rng::{derive_seed, stream_rng};
use crate::shift::{estimate_class_means, estimate_regional_shift, fpsa_classify, fsa_transform, psa_reweight};

/// Transfer method applied to each target region.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    Gmc,
    Uat,
    Psa,
    Fsa,
    Fpsa,
    SmotePsa,
    ZtFpsa,
    ZtSmoteFpsa,
}

impl Method {
    pub const ALL: [Method; 8] = [
        Method::Gmc,
        Method::Uat,
        Method::Psa,
        Method::Fsa,
        Method::Fpsa,
        Method::SmotePsa,
        Method::ZtFpsa,
        Method::ZtSmoteFpsa,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            Method::Gmc => "gmc",
            Method::Uat => "uat",
            Method::Psa => "psa",
            Method::Fsa => "fsa",
            Method::Fpsa => "fpsa",
            Method::SmotePsa => "smote-psa",
            Method::ZtFpsa => "zt-fpsa",
            Method::ZtSmoteFpsa => "zt-smote-fpsa",
        }
    }

    pub fn needs_priors(&self) -> bool {
        !matches!(self, Method::Uat)
    }

    /// Whether the classifier is refit for every target region.
    pub fn refits_per_target(&self) -> bool {
        matches!(self, Method::SmotePsa | Method::ZtFpsa | Method::ZtSmoteFpsa)
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Method::ALL
            .into_iter()
            .find(|m| m.as_str() == s)
            .ok_or_else(|| Error::InvalidParams(format!("unknown method {s}")))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub classifier: ClassifierConfig,
    pub smote_k: usize,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig { classifier: ClassifierConfig::default(), smote_k: DEFAULT_SMOTE_K }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegionOutcome {
    pub confusion: ConfusionMatrix,
    pub metrics: MetricsReport,
    /// Predicted class index per test row, in dataset order.
    pub predictions: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentResult {
    pub train_region: String,
    pub method: Method,
    pub seed: u64,
    pub config: ExperimentConfig,
    pub regions: BTreeMap<String, RegionOutcome>,
    pub aggregate: ConfusionMatrix,
    pub aggregate_metrics: MetricsReport,
}

/// Trains on one region and evaluates `method` on every other region.
///
/// The base classifier is fitted once, except for the SMOTE and z-transform
/// pipelines, which are refit for each target. Shift and prior corrections
/// are always estimated per target region.
pub fn run_transfer_experiment(
    regions: &BTreeMap<String, Dataset>,
    train_region: &str,
    method: Method,
    priors: &BTreeMap<String, ClassPriors>,
    config: &ExperimentConfig,
    seed: u64,
) -> Result<ExperimentResult> {
    let train = regions
        .get(train_region)
        .ok_or_else(|| Error::UnknownRegion(train_region.to_string()))?;
    let class_list = train.class_list();
    if let Some((r, _)) = regions.iter().find(|(_, d)| d.class_list() != class_list) {
        return Err(Error::ClassMismatch(format!("region {r} uses a different class list")));
    }
    if let Some(k) = train.class_counts().iter().position(|&c| c == 0) {
        return Err(Error::TrainRegionMissingClass {
            region: train_region.to_string(),
            class: class_list.name(k).to_string(),
        });
    }

    let targets: Vec<(usize, &String, &Dataset)> = regions
        .iter()
        .enumerate()
        .filter(|(_, (r, _))| r.as_str() != train_region)
        .map(|(i, (r, d))| (i, r, d))
        .collect();
    if method.needs_priors() {
        if let Some((_, r, _)) = targets.iter().find(|(_, r, _)| !priors.contains_key(*r)) {
            return Err(Error::MissingPriors(r.to_string()));
        }
    }

    let classifier = config.classifier.with_seed(seed);
    let base_model = match method {
        Method::Uat | Method::Psa | Method::Fsa | Method::Fpsa => Some(classifier.fit(train)?),
        _ => None,
    };
    let context = TargetContext {
        train,
        train_priors: ClassPriors::empirical(train_region, train),
        model: base_model.as_ref(),
        classifier: &classifier,
        smote_k: config.smote_k,
    };

    let predict = |&(idx, region, data): &(usize, &String, &Dataset)| -> Result<Vec<usize>> {
        let target_seed = derive_seed(seed, idx as u64);
        context
            .predict(method, data, priors.get(region), target_seed)
            .map_err(|e| e.in_region(region))
    };

    #[cfg(feature = "parallel")]
    let predictions: Vec<Vec<usize>> = {
        use rayon::prelude::*;
        targets.par_iter().map(predict).collect::<Result<_>>()?
    };
    #[cfg(not(feature = "parallel"))]
    let predictions: Vec<Vec<usize>> = targets.iter().map(predict).collect::<Result<_>>()?;

    let mut aggregate = ConfusionMatrix::zeros(class_list.clone());
    let mut outcomes = BTreeMap::new();
    for ((_, region, data), pred) in targets.iter().zip(predictions) {
        let cm = ConfusionMatrix::from_indices(class_list.clone(), data.labels(), &pred)?;
        aggregate.add(&cm)?;
        outcomes.insert(
            region.to_string(),
            RegionOutcome { metrics: metrics(&cm)?, confusion: cm, predictions: pred },
        );
    }
    Ok(ExperimentResult {
        train_region: train_region.to_string(),
        method,
        seed,
        config: config.clone(),
        regions: outcomes,
        aggregate_metrics: metrics(&aggregate)?,
        aggregate,
    })
}

struct TargetContext<'a> {
    train: &'a Dataset,
    train_priors: ClassPriors,
    model: Option<&'a TrainedClassifier>,
    classifier: &'a ClassifierConfig,
    smote_k: usize,
}

impl TargetContext<'_> {
    fn predict(&self, method: Method, test: &Dataset, test_priors: Option<&ClassPriors>, seed: u64) -> Result<Vec<usize>> {
        let priors = || test_priors.ok_or_else(|| Error::MissingPriors(test.regions()[0].clone()));
        let model = || self.model.expect("base model fitted for this method");
        let cl = self.train.class_list();
        match method {
            Method::Gmc => {
                let k = major_class_classify(priors()?, cl)?;
                Ok(vec![k; test.len()])
            }
            Method::Uat => test.rows().iter().map(|x| model().predict(x)).collect(),
            Method::Psa => {
                let p = priors()?;
                test.rows()
                    .iter()
                    .map(|x| Ok(psa_reweight(&model().posteriors(x)?, cl, &self.train_priors, p)?.argmax()))
                    .collect()
            }
            Method::Fsa => {
                let shift = self.shift_for(test, priors()?)?;
                test.rows()
                    .iter()
                    .map(|x| model().predict(&fsa_transform(x, &shift)?))
                    .collect()
            }
            Method::Fpsa => {
                let p = priors()?;
                let shift = self.shift_for(test, p)?;
                test.rows()
                    .iter()
                    .map(|x| fpsa_classify(model(), x, &shift, &self.train_priors, p))
                    .collect()
            }
            Method::SmotePsa => {
                pipeline_smote_psa(self.train, test, priors()?, &self.classifier.with_seed(seed), self.smote_k, seed)
            }
            Method::ZtFpsa => pipeline_zt_fpsa(self.train, test, priors()?, &self.classifier.with_seed(seed)),
            Method::ZtSmoteFpsa => {
                pipeline_zt_smote_fpsa(self.train, test, priors()?, &self.classifier.with_seed(seed), self.smote_k, seed)
            }
        }
    }

    fn shift_for(&self, test: &Dataset, priors: &ClassPriors) -> Result<crate::shift::RegionalShift> {
        let means = estimate_class_means(self.train)?;
        estimate_regional_shift(&test.feature_mean(), priors, &means)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegionCv {
    pub accuracy: f64,
    pub n: usize,
}

/// In-region cross-validated accuracies, the ceiling for transfer methods.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OracleReport {
    pub folds: usize,
    pub regions: BTreeMap<String, RegionCv>,
}

impl OracleReport {
    /// Size-weighted mean CV accuracy over every region except `train_region`.
    pub fn transfer_bound(&self, train_region: &str) -> Result<f64> {
        if !self.regions.contains_key(train_region) {
            return Err(Error::UnknownRegion(train_region.to_string()));
        }
        let (num, den) = self
            .regions
            .iter()
            .filter(|(r, _)| r.as_str() != train_region)
            .fold((0.0, 0usize), |(num, den), (_, cv)| (num + cv.accuracy * cv.n as f64, den + cv.n));
        if den == 0 {
            return Err(Error::InsufficientData("no test regions".into()));
        }
        Ok(num / den as f64)
    }
}

/// Group-aware k-fold cross-validation within each region.
///
/// Groups (plots) are shuffled with a per-region seed and dealt round-robin
/// to folds, so no group straddles train and test. Rows without group ids
/// form singleton groups.
pub fn oracle_cv(data: &Dataset, folds: usize, classifier: &ClassifierConfig, seed: u64) -> Result<OracleReport> {
    if folds < 2 {
        return Err(Error::InvalidParams("need at least 2 folds".into()));
    }
    let by_region = data.split_by_region()?;
    let jobs: Vec<(usize, &String, &Dataset)> =
        by_region.iter().enumerate().map(|(i, (r, d))| (i, r, d)).collect();
    let run = |&(i, region, d): &(usize, &String, &Dataset)| -> Result<(String, RegionCv)> {
        let region_seed = derive_seed(seed, i as u64);
        let acc = region_cv(d, folds, classifier, region_seed).map_err(|e| match e {
            Error::TooFewGroups(_) => Error::TooFewGroups(region.clone()),
            e => e.in_region(region),
        })?;
        Ok((region.clone(), RegionCv { accuracy: acc, n: d.len() }))
    };

    #[cfg(feature = "parallel")]
    let regions = {
        use rayon::prelude::*;
        jobs.par_iter().map(run).collect::<Result<Vec<_>>>()?
    };
    #[cfg(not(feature = "parallel"))]
    let regions = jobs.iter().map(run).collect::<Result<Vec<_>>>()?;

    Ok(OracleReport { folds, regions: regions.into_iter().collect() })
}

/// Fold index per row.
pub fn assign_folds(data: &Dataset, folds: usize, seed: u64) -> Result<Vec<usize>> {
    let keys: Vec<String> = match data.group_ids() {
        Some(g) => g.to_vec(),
        None => (0..data.len()).map(|i| i.to_string()).collect(),
    };
    let mut groups: Vec<&String> = Vec::new();
    let mut seen = std::collections::HashSet::new();
    for k in &keys {
        if seen.insert(k) {
            groups.push(k);
        }
    }
    if groups.len() < folds {
        return Err(Error::TooFewGroups(data.regions()[0].clone()));
    }
    groups.shuffle(&mut stream_rng(seed, 0));
    let fold_of: std::collections::HashMap<&String, usize> =
        groups.iter().enumerate().map(|(i, g)| (*g, i % folds)).collect();
    Ok(keys.iter().map(|k| fold_of[k]).collect())
}

fn region_cv(data: &Dataset, folds: usize, classifier: &ClassifierConfig, seed: u64) -> Result<f64> {
    let fold = assign_folds(data, folds, seed)?;
    let mut correct = 0usize;
    for f in 0..folds {
        let train_idx: Vec<usize> = (0..data.len()).filter(|&i| fold[i] != f).collect();
        let test_idx: Vec<usize> = (0..data.len()).filter(|&i| fold[i] == f).collect();
        let model = classifier.with_seed(derive_seed(seed, f as u64)).fit(&data.subset(&train_idx)?)?;
        for &i in &test_idx {
            if model.predict(data.row(i))? == data.labels()[i] {
                correct += 1;
            }
        }
    }
    Ok(correct as f64 / data.len() as f64)
}
