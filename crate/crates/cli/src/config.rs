use std::path::{Path, PathBuf};

use cropshift::{ClassifierConfig, ForestParams, Method};
use serde::{Deserialize, Serialize};

use crate::CliError;

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum ClassifierKind {
    Lda,
    Rf,
}

/// Which methods to run.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MethodChoice {
    One(Method),
    All,
}

impl MethodChoice {
    pub fn methods(&self) -> Vec<Method> {
        match self {
            MethodChoice::One(m) => vec![*m],
            MethodChoice::All => Method::ALL.to_vec(),
        }
    }
}

impl std::str::FromStr for MethodChoice {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        if s == "all" {
            return Ok(MethodChoice::All);
        }
        s.parse().map(MethodChoice::One).map_err(|e: cropshift::Error| e.to_string())
    }
}

impl std::fmt::Display for MethodChoice {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            MethodChoice::One(m) => write!(f, "{m}"),
            MethodChoice::All => f.write_str("all"),
        }
    }
}

/// Experiment settings as written in a config file. Every key is optional;
/// command-line flags take precedence.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfigFile {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub schema_version: Option<u32>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub method: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub classifier: Option<ClassifierKind>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub ridge: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub n_trees: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub features_per_split: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub min_leaf: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub max_depth: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub smote_k: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub train_region: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub features: Option<Vec<PathBuf>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub priors: Option<PathBuf>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub out_dir: Option<PathBuf>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub oracle_folds: Option<usize>,
}

impl RunConfigFile {
    /// Reads a config file; relative paths inside it resolve against its directory.
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
        let mut cfg: RunConfigFile =
            toml::from_str(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        match cfg.schema_version {
            Some(SCHEMA_VERSION) => {}
            Some(v) => return Err(CliError::Config(format!("unsupported schema_version {v}"))),
            None => return Err(CliError::Config("config file lacks schema_version".into())),
        }
        let base = path.parent().unwrap_or(Path::new(""));
        let rebase = |p: PathBuf| if p.is_relative() { base.join(p) } else { p };
        cfg.features = cfg.features.map(|v| v.into_iter().map(rebase).collect());
        cfg.priors = cfg.priors.map(rebase);
        cfg.out_dir = cfg.out_dir.map(rebase);
        Ok(cfg)
    }

    /// `other`'s keys win where set.
    pub fn overlay(self, other: RunConfigFile) -> RunConfigFile {
        RunConfigFile {
            schema_version: Some(SCHEMA_VERSION),
            method: other.method.or(self.method),
            classifier: other.classifier.or(self.classifier),
            ridge: other.ridge.or(self.ridge),
            n_trees: other.n_trees.or(self.n_trees),
            features_per_split: other.features_per_split.or(self.features_per_split),
            min_leaf: other.min_leaf.or(self.min_leaf),
            max_depth: other.max_depth.or(self.max_depth),
            smote_k: other.smote_k.or(self.smote_k),
            seed: other.seed.or(self.seed),
            train_region: other.train_region.or(self.train_region),
            features: other.features.filter(|f| !f.is_empty()).or(self.features),
            priors: other.priors.or(self.priors),
            out_dir: other.out_dir.or(self.out_dir),
            oracle_folds: other.oracle_folds.or(self.oracle_folds),
        }
    }

    pub fn resolve(self) -> Result<RunConfig, CliError> {
        let missing = |key: &str| CliError::Config(format!("missing required setting {key}"));
        let method: MethodChoice = self
            .method
            .as_deref()
            .ok_or_else(|| missing("method"))?
            .parse()
            .map_err(CliError::Config)?;
        let kind = self.classifier.unwrap_or(ClassifierKind::Lda);
        let classifier = match kind {
            ClassifierKind::Lda => ClassifierConfig::Lda {
                ridge: self.ridge.unwrap_or(cropshift::classify::lda::DEFAULT_RIDGE),
            },
            ClassifierKind::Rf => {
                let d = ForestParams::default();
                ClassifierConfig::Rf(ForestParams {
                    n_trees: self.n_trees.unwrap_or(d.n_trees),
                    features_per_split: self.features_per_split,
                    min_leaf: self.min_leaf.unwrap_or(d.min_leaf),
                    max_depth: self.max_depth,
                    seed: d.seed,
                })
            }
        };
        let stochastic = kind == ClassifierKind::Rf
            || self.oracle_folds.is_some()
            || method.methods().iter().any(|m| matches!(m, Method::SmotePsa | Method::ZtSmoteFpsa));
        let seed = match self.seed {
            Some(s) => s,
            None if stochastic => return Err(CliError::Config("a seed is required for stochastic runs".into())),
            None => 0,
        };
        let features = self.features.filter(|f| !f.is_empty()).ok_or_else(|| missing("features"))?;
        let needs_priors = method.methods().iter().any(Method::needs_priors);
        if needs_priors && self.priors.is_none() {
            return Err(CliError::Config(format!("method {method} needs a priors file")));
        }
        Ok(RunConfig {
            method,
            classifier_kind: kind,
            classifier,
            smote_k: self.smote_k.unwrap_or(cropshift::baselines::DEFAULT_SMOTE_K),
            seed,
            train_region: self.train_region.ok_or_else(|| missing("train_region"))?,
            features,
            priors: self.priors,
            out_dir: self.out_dir.ok_or_else(|| missing("out_dir"))?,
            oracle_folds: self.oracle_folds,
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub method: MethodChoice,
    pub classifier_kind: ClassifierKind,
    pub classifier: ClassifierConfig,
    pub smote_k: usize,
    pub seed: u64,
    pub train_region: String,
    pub features: Vec<PathBuf>,
    pub priors: Option<PathBuf>,
    pub out_dir: PathBuf,
    pub oracle_folds: Option<usize>,
}

impl RunConfig {
    /// The fully resolved settings, in config-file form.
    pub fn echo(&self) -> RunConfigFile {
        let (ridge, forest) = match &self.classifier {
            ClassifierConfig::Lda { ridge } => (Some(*ridge), None),
            ClassifierConfig::Rf(p) => (None, Some(p)),
        };
        RunConfigFile {
            schema_version: Some(SCHEMA_VERSION),
            method: Some(self.method.to_string()),
            classifier: Some(self.classifier_kind),
            ridge,
            n_trees: forest.map(|p| p.n_trees),
            features_per_split: forest.and_then(|p| p.features_per_split),
            min_leaf: forest.map(|p| p.min_leaf),
            max_depth: forest.and_then(|p| p.max_depth),
            smote_k: Some(self.smote_k),
            seed: Some(self.seed),
            train_region: Some(self.train_region.clone()),
            features: Some(self.features.clone()),
            priors: self.priors.clone(),
            out_dir: Some(self.out_dir.clone()),
            oracle_folds: self.oracle_folds,
        }
    }
}
