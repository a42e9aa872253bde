//! Prior-shift and feature-shift adjustment for transferring multi-class
//! classifiers between regions.
//!
//! The pipeline runs from raw quality-flagged band time series
//! ([`features`]) through base classifiers exposing posteriors
//! ([`classify`]), the shift corrections themselves ([`shift`]) and the
//! comparison baselines ([`baselines`]), to transfer experiments and metrics
//! ([`eval`]). [`synth`] generates regional Gaussian-mixture worlds with a
//! known Bayes rule for validation.

pub mod baselines;
pub mod classify;
pub mod error;
pub mod eval;
pub mod features;
pub mod io;
pub mod priors;
pub mod rng;
pub mod shift;
pub mod synth;

pub use classify::{ClassList, ClassifierConfig, Dataset, ForestParams, PosteriorVector, TrainedClassifier};
pub use error::{Error, Result};
pub use eval::{ExperimentConfig, ExperimentResult, Method};
pub use priors::ClassPriors;
pub use shift::{ClassMeans, RegionalShift};
pub use synth::SyntheticSpec;
