//! `cropshift` command-line interface.
//!
//! Exit codes: 0 success, 2 input or parse errors, 3 unusable training data,
//! 4 configuration errors.

mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use config::ClassifierKind;

#[derive(Debug)]
pub enum CliError {
    Core(cropshift::Error),
    Config(String),
    Input(String),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        use cropshift::Error as E;
        match self {
            CliError::Config(_) => 4,
            CliError::Input(_) => 2,
            CliError::Core(e) => match e.root() {
                E::TrainRegionMissingClass { .. }
                | E::EmptyClass(_)
                | E::SingularCovariance
                | E::SmoteInfeasible { .. }
                | E::InsufficientData(_)
                | E::ZeroTrainPrior(_)
                | E::TooFewGroups(_)
                | E::AllZeroScores => 3,
                E::MissingPriors(_) | E::UnknownRegion(_) | E::InvalidParams(_) => 4,
                _ => 2,
            },
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Core(e) => write!(f, "{e}"),
            CliError::Config(m) => write!(f, "configuration: {m}"),
            CliError::Input(m) => f.write_str(m),
        }
    }
}

impl From<cropshift::Error> for CliError {
    fn from(e: cropshift::Error) -> Self {
        CliError::Core(e)
    }
}

#[derive(Parser)]
#[command(name = "cropshift", version, about = "Prior- and feature-shift adjusted classifier transfer")]
struct Cli {
    /// Worker threads for parallel stages (outputs do not depend on it).
    #[arg(long, global = true)]
    workers: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Harmonic features from a long-format band time series.
    Features(FeaturesArgs),
    /// Generate a synthetic regional Gaussian-mixture world.
    Synth(SynthArgs),
    /// Train on one region and evaluate a transfer method on the rest.
    Experiment(ExperimentArgs),
    /// Fit a base classifier on one region and save it.
    Train(TrainArgs),
    /// Shannon entropy (nats) of each region's class priors.
    Entropy(EntropyArgs),
    /// Convert crop areas and mean field areas into class priors.
    PriorsFromAreas(AreasArgs),
}

#[derive(Args)]
struct FeaturesArgs {
    /// Input CSV: pixel_id,region_id,label,band,time_years,value,clear
    #[arg(long)]
    input: PathBuf,
    /// Band order, comma separated (use GCVI for the derived index).
    #[arg(long, value_delimiter = ',', conflicts_with = "manifest", required_unless_present = "manifest")]
    bands: Vec<String>,
    /// File listing one band per line.
    #[arg(long)]
    manifest: Option<PathBuf>,
    /// NIR and green band names used to derive GCVI.
    #[arg(long, value_delimiter = ',')]
    gcvi: Option<Vec<String>>,
    /// April-1 season anchor, needed when times are given as dates.
    #[arg(long)]
    anchor: Option<chrono::NaiveDate>,
    /// Output feature CSV; the band manifest and drop report are written beside it.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct SynthArgs {
    /// Spec file (TOML); the built-in acceptance world when absent.
    #[arg(long)]
    spec: Option<PathBuf>,
    /// Override the spec's seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Print the spec as TOML instead of generating data.
    #[arg(long)]
    dump_spec: bool,
    #[arg(long, required_unless_present = "dump_spec")]
    out: Option<PathBuf>,
}

#[derive(Args, Default)]
struct ClassifierArgs {
    #[arg(long, value_enum)]
    classifier: Option<ClassifierKind>,
    /// LDA covariance ridge, relative to the mean variance.
    #[arg(long)]
    ridge: Option<f64>,
    #[arg(long)]
    n_trees: Option<usize>,
    /// Features tried per split (default ceil(sqrt(d))).
    #[arg(long)]
    features_per_split: Option<usize>,
    #[arg(long)]
    min_leaf: Option<usize>,
    #[arg(long)]
    max_depth: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Args)]
struct ExperimentArgs {
    /// Run config (TOML); flags override its keys.
    #[arg(long)]
    config: Option<PathBuf>,
    /// gmc, uat, psa, fsa, fpsa, smote-psa, zt-fpsa, zt-smote-fpsa, or all.
    #[arg(long)]
    method: Option<String>,
    /// Feature CSVs (repeatable).
    #[arg(long)]
    features: Vec<PathBuf>,
    #[arg(long)]
    priors: Option<PathBuf>,
    #[arg(long)]
    train_region: Option<String>,
    #[arg(long)]
    smote_k: Option<usize>,
    /// Also run group-aware cross-validation with this many folds.
    #[arg(long)]
    oracle_folds: Option<usize>,
    #[arg(long)]
    out: Option<PathBuf>,
    #[command(flatten)]
    classifier: ClassifierArgs,
}

#[derive(Args)]
struct TrainArgs {
    #[arg(long, required = true)]
    features: Vec<PathBuf>,
    #[arg(long)]
    region: String,
    #[arg(long)]
    out: PathBuf,
    #[command(flatten)]
    classifier: ClassifierArgs,
}

#[derive(Args)]
struct EntropyArgs {
    #[arg(long)]
    priors: PathBuf,
    /// Output CSV; stdout when absent.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct AreasArgs {
    /// CSV: region_id,class,area,mean_field_area
    #[arg(long)]
    input: PathBuf,
    /// Output priors CSV; stdout when absent.
    #[arg(long)]
    out: Option<PathBuf>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(n) = cli.workers {
        if n == 0 {
            eprintln!("error: configuration: --workers must be positive");
            return ExitCode::from(4);
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .expect("global thread pool configured once");
    }
    let result = match cli.command {
        Command::Features(a) => commands::features(a),
        Command::Synth(a) => commands::synth(a),
        Command::Experiment(a) => commands::experiment(a),
        Command::Train(a) => commands::train(a),
        Command::Entropy(a) => commands::entropy(a),
        Command::PriorsFromAreas(a) => commands::priors_from_areas(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
