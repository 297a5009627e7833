use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("invalid partition: {0}")]
    InvalidPartition(String),

    /// A model failed one of its structural invariants; `invariant` names it.
    #[error("model violates invariant `{invariant}`: {detail}")]
    InvalidModel {
        invariant: &'static str,
        detail: String,
    },

    #[error("degenerate input: {0}")]
    DegenerateInput(&'static str),

    #[error("reward {value} outside the allowed range [{low}, {high}]")]
    RewardOutOfRange { value: f64, low: f64, high: f64 },

    #[error("arm index {arm} out of range for {arms} arms")]
    ArmOutOfRange { arm: usize, arms: usize },

    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },

    #[error("configuration error: {0}")]
    Config(String),

    #[error("configuration parse error: {0}")]
    Parse(#[from] toml::de::Error),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn param(name: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            name,
            reason: reason.into(),
        }
    }

    pub(crate) fn model(invariant: &'static str, detail: impl Into<String>) -> Self {
        Error::InvalidModel {
            invariant,
            detail: detail.into(),
        }
    }
}
