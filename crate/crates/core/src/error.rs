use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("GCVI undefined: green reflectance is zero")]
    DivisionByZero,

    #[error("harmonic fit needs at least 5 distinct time values, got {distinct}")]
    InsufficientObservations { distinct: usize },

    #[error("harmonic design matrix is rank deficient (singular value ratio {ratio:e})")]
    RankDeficient { ratio: f64 },

    /// A per-band failure while featurizing one pixel.
    #[error("pixel {pixel_id}, band {band}: {source}")]
    PixelBand {
        pixel_id: String,
        band: String,
        #[source]
        source: Box<Error>,
    },

    #[error("band {0} missing from observation")]
    MissingBand(String),

    #[error("class {0} has no training samples")]
    EmptyClass(String),

    #[error("pooled covariance is not positive definite")]
    SingularCovariance,

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("invalid parameters: {0}")]
    InvalidParams(String),

    #[error("insufficient data: {0}")]
    InsufficientData(String),

    #[error("class {0} has zero prior in the training region")]
    ZeroTrainPrior(String),

    #[error("class lists differ: {0}")]
    ClassMismatch(String),

    #[error("reweighted posterior is identically zero")]
    AllZeroScores,

    #[error("mean field area for class {0} must be positive")]
    ZeroMeanFieldArea(String),

    #[error("all class areas are zero")]
    AllZeroAreas,

    #[error("SMOTE infeasible for class {class}: {available} samples, need at least {required}")]
    SmoteInfeasible {
        class: String,
        available: usize,
        required: usize,
    },

    #[error("length mismatch: {0} vs {1}")]
    LengthMismatch(usize, usize),

    #[error("unknown label {0}")]
    UnknownLabel(String),

    #[error("confusion matrix is empty")]
    EmptyMatrix,

    #[error("training region {region} lacks class {class}")]
    TrainRegionMissingClass { region: String, class: String },

    #[error("no priors for region {0}")]
    MissingPriors(String),

    #[error("unknown region {0}")]
    UnknownRegion(String),

    #[error("region {0} has fewer groups than folds")]
    TooFewGroups(String),

    #[error("invalid synthetic spec: {0}")]
    InvalidSpec(String),

    #[error("invalid priors: {0}")]
    InvalidPriors(String),

    #[error("region {region}: {source}")]
    Region {
        region: String,
        #[source]
        source: Box<Error>,
    },

    #[error("line {line}: {message}")]
    Parse { line: u64, message: String },

    #[error("i/o: {0}")]
    Io(String),

    #[error("model file: {0}")]
    ModelFormat(String),
}

impl Error {
    pub(crate) fn in_region(self, region: &str) -> Self {
        Error::Region {
            region: region.to_string(),
            source: Box::new(self),
        }
    }

    /// The innermost error, with region/pixel tags peeled off.
    pub fn root(&self) -> &Error {
        match self {
            Error::Region { source, .. } | Error::PixelBand { source, .. } => source.root(),
            e => e,
        }
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

impl From<csv::Error> for Error {
    fn from(e: csv::Error) -> Self {
        let line = e.position().map(|p| p.line()).unwrap_or(0);
        Error::Parse {
            line,
            message: e.to_string(),
        }
    }
}
