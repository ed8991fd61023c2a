use thiserror::Error;

use crate::dist::TokenId;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("distribution is empty")]
    EmptyDistribution,

    #[error("weights must contain at least one strictly positive value")]
    AllZeroWeights,

    #[error("length mismatch: {ids} ids but {weights} weights")]
    LengthMismatch { ids: usize, weights: usize },

    #[error("duplicate token id {0}")]
    DuplicateId(TokenId),

    #[error("invalid weight {value} for token {id}: weights must be finite and nonnegative")]
    InvalidWeight { id: TokenId, value: f64 },

    #[error("invalid parameter {name}: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("token {0} is not in the distribution support")]
    NotInSupport(TokenId),

    #[error("internal consistency error: {0}")]
    Inconsistent(String),

    #[error("infinite divergence: reference assigns mass to token {0} outside the support")]
    InfiniteDivergence(TokenId),

    #[error("zipf fit is undefined with {0} distinct tokens (need at least 2)")]
    UndefinedFit(usize),

    #[error("insufficient samples: need at least {needed}, got {got}")]
    InsufficientSamples { needed: usize, got: usize },

    #[error("sample {0} carries no step distributions")]
    MissingDistributions(usize),

    #[error("sample {sample} has mismatched lengths: {tokens} tokens vs {field} of length {len}")]
    SampleShape { sample: usize, tokens: usize, field: &'static str, len: usize },

    #[error("token {token} at position {position} of sample {sample} has zero probability under the model")]
    ZeroProbability { sample: usize, position: usize, token: TokenId },

    #[error("corpus too short: {len} tokens for an order-{order} model")]
    CorpusTooShort { len: usize, order: usize },

    #[error("word {0:?} is not in the vocabulary")]
    UnknownWord(String),

    #[error("malformed model file: {0}")]
    ModelFormat(String),

    #[error("empty input: {0}")]
    EmptyInput(&'static str),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Error {
    Error::InvalidParameter { name, reason: reason.into() }
}
