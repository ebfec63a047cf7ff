use thiserror::Error;

/// Errors raised when an operation's contract is violated.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid grid shape {height}x{width}: both sides must be at least 1 and H*W must fit in i64")]
    InvalidShape { height: usize, width: usize },

    #[error("shape mismatch: expected {expected}, found {found}")]
    ShapeMismatch { expected: String, found: String },

    #[error("sequence of length {len} is not a permutation of 0..{len}")]
    NotAPermutation { len: usize },

    #[error("cache capacity must be at least 1")]
    ZeroCapacity,

    #[error("device signature must be non-empty")]
    EmptyDevice,

    #[error("invalid state-space parameters: {0}")]
    InvalidParams(String),

    #[error("non-finite value in input")]
    NonFinite,

    #[error("at least 2 channels are required, got {0}")]
    TooFewChannels(usize),

    #[error("kernel bandwidth must be positive, got {0}")]
    InvalidBandwidth(f64),

    #[error("invalid gate configuration: {0}")]
    InvalidGateConfig(String),

    #[error("cannot aggregate an empty batch")]
    EmptyBatch,

    #[error("unknown scenario `{0}`")]
    UnknownScenario(String),

    #[error("unknown report format `{0}`")]
    UnknownFormat(String),

    #[error("invalid stage model: {0}")]
    InvalidStageModel(String),

    #[error("malformed mask data: {0}")]
    MaskFormat(String),

    #[error("malformed manifest line {line}: {reason}")]
    Manifest { line: usize, reason: String },

    #[error("serialization failed: {0}")]
    Serialize(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    /// Short machine-readable tag for the error variant.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::InvalidShape { .. } => "invalid_shape",
            Error::ShapeMismatch { .. } => "shape_mismatch",
            Error::NotAPermutation { .. } => "not_a_permutation",
            Error::ZeroCapacity => "zero_capacity",
            Error::EmptyDevice => "empty_device",
            Error::InvalidParams(_) => "invalid_params",
            Error::NonFinite => "non_finite",
            Error::TooFewChannels(_) => "too_few_channels",
            Error::InvalidBandwidth(_) => "invalid_bandwidth",
            Error::InvalidGateConfig(_) => "invalid_gate_config",
            Error::EmptyBatch => "empty_batch",
            Error::UnknownScenario(_) => "unknown_scenario",
            Error::UnknownFormat(_) => "unknown_format",
            Error::InvalidStageModel(_) => "invalid_stage_model",
            Error::MaskFormat(_) => "mask_format",
            Error::Manifest { .. } => "manifest",
            Error::Serialize(_) => "serialize",
            Error::Io(_) => "io",
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
