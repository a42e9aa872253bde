//! Confusion-matrix metrics, the train-on-one/test-on-rest harness, and the
//! in-region cross-validated oracle.

mod experiment;
mod metrics;

pub use experiment::{
    assign_folds, oracle_cv, run_transfer_experiment, ExperimentConfig, ExperimentResult, Method, OracleReport,
    RegionCv, RegionOutcome,
};
pub use metrics::{confusion, entropy_of, metrics, shannon_entropy, ConfusionMatrix, MetricsReport};
