use thiserror::Error;

use crate::vocab::TokenId;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("token id {id} is outside a vocabulary of size {size}")]
    InvalidToken { id: TokenId, size: usize },
    #[error("unknown token {0:?}")]
    UnknownToken(String),
    #[error("duplicate token {0:?} in vocabulary")]
    DuplicateToken(String),
    #[error("vocabulary must start with the end-of-sequence token \"</s>\"")]
    MissingEos,
    #[error("token {0:?} is reserved")]
    ReservedToken(String),
    #[error("sequence contains the end-of-sequence token")]
    EosInSequence,
    #[error("invalid probability {0:?}")]
    InvalidProbability(String),
    #[error("probabilities sum to {0}, expected 1")]
    NotNormalized(f64),
    #[error("support size must be at least 1")]
    ZeroSupport,
    #[error("distributions are defined over different vocabularies")]
    VocabMismatch,
    #[error("word {0:?} has no typo variants")]
    EmptyVariantSet(String),
    #[error("typo variant {0:?} equals its clean word")]
    VariantEqualsWord(String),
    #[error("corpus is empty")]
    EmptyCorpus,
    #[error("n-gram order {order} exceeds max_len + 1 = {}", max_len + 1)]
    OrderTooLarge { order: usize, max_len: usize },
    #[error("no sequence of length {length} has positive probability")]
    NoFeasibleSequence { length: usize },
    #[error("enumeration would visit more than {limit} prefixes")]
    EnumerationLimit { limit: usize },
    #[error("search budget exceeded before the space was exhausted")]
    BudgetExceeded,
    #[error("horizon {horizon} is smaller than the forced end-of-sequence depth {required}")]
    HorizonTooSmall { horizon: usize, required: usize },
    #[error("attribute class {class} outside predictor space of {classes} classes")]
    PredictorDomain { class: usize, classes: usize },
    #[error("length mismatch: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error("json: {0}")]
    Json(String),
    #[error("{path}: {msg}")]
    Io { path: String, msg: String },
}

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        Error::Json(e.to_string())
    }
}
