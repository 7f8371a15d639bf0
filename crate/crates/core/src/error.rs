use alloc::string::String;

/// Errors raised by the algorithmic core.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("invalid audio clip: {0}")]
    InvalidClip(&'static str),
    #[error("clip has {len} samples, need at least {needed}")]
    ClipTooShort { len: usize, needed: usize },
    #[error("silent input")]
    SilentInput,
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("band {lo} Hz to {hi} Hz contains no frequency bins")]
    EmptyBand { lo: f64, hi: f64 },
    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },
    #[error("provider mismatch: expected `{expected}`, got `{actual}`")]
    ProviderMismatch { expected: String, actual: String },
    #[error("need at least {needed} items, got {actual}")]
    NotEnoughData { needed: usize, actual: usize },
    #[error("k = {k} exceeds the reference set size {n}")]
    KTooLarge { k: usize, n: usize },
    #[error("non-finite value")]
    NonFinite,
    #[error("threshold t = {0} outside [0, 0.5)")]
    InvalidThreshold(f64),
    #[error("invalid manifest: {0}")]
    InvalidManifest(String),
    #[error("missing timbre vector for clip `{0}`")]
    MissingTimbre(String),
    #[error("condition `{0}` has anomalous clips but no normal training clips")]
    NoNormalTraining(String),
    #[error(
        "no ground-truth record for condition `{condition}`, cause `{cause}` (clip `{clip_id}`)"
    )]
    MissingRecord {
        clip_id: String,
        condition: String,
        cause: String,
    },
    #[error("missing prediction for clip `{0}`")]
    MissingPrediction(String),
    #[error("label {0} outside {{-1, 0, 1}}")]
    InvalidLabel(i64),
}

pub type Result<T> = core::result::Result<T, Error>;
