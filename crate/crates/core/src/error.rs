use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("prediction does not sum to one (sum = {sum})")]
    NonNormalizedPrediction { sum: f64 },
    #[error("negative probability {value} at bin {bin}")]
    NegativeProbability { bin: usize, value: f64 },
    #[error("output bin {bin} out of range for {bins} bins")]
    BinOutOfRange { bin: usize, bins: usize },
    #[error("length mismatch: expected {expected}, got {actual}")]
    LengthMismatch { expected: usize, actual: usize },
    #[error("empty input")]
    EmptyInput,
    #[error("KL divergence undefined: p({bin}) > 0 but m({bin}) = 0")]
    UndefinedDivergence { bin: usize },
    #[error("bandwidth must be positive, got {0}")]
    NonPositiveBandwidth(f64),
    #[error("temperature must be nonnegative, got {0}")]
    NegativeTemperature(f64),
    #[error("cannot remove the only remaining batch")]
    LastBatch,
    #[error("index {index} out of range for {len} entries")]
    IndexOutOfRange { index: usize, len: usize },
    #[error("current batch set is empty")]
    EmptyCurrentSet,
    #[error("capacity {capacity} cannot hold a single batch of {batch} samples")]
    CapacityTooSmallForOneBatch { capacity: usize, batch: usize },
    #[error("predictor expects {expected} features, sample has {actual}")]
    PredictorDimensionMismatch { expected: usize, actual: usize },
    #[error("predictor needs the sample label and cannot predict from features alone")]
    RequiresLabel,
    #[error("training set is empty")]
    EmptyTrainingSet,
    #[error("sample {0} has no score for this strategy")]
    MissingScores(u64),
    #[error("strategy requires a classification task")]
    NotClassification,
    #[error("committee is empty")]
    EmptyCommittee,
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("malformed sample record on line {line}: {message}")]
    Record { line: usize, message: String },
    #[error("io error: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(err: std::io::Error) -> Self {
        Error::Io(err.to_string())
    }
}
