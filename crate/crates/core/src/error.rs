use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {found}")]
    Dimension { expected: usize, found: usize },

    #[error("cause labels differ between matrices")]
    LabelMismatch,

    #[error("invalid cause set: {0}")]
    CauseSet(String),

    #[error("row {row} is not a probability vector: {reason}")]
    NotStochastic { row: usize, reason: String },

    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("relative false-positive row {row} is undefined but sensitivity is {sensitivity}")]
    MissingRelFp { row: usize, sensitivity: f64 },

    #[error("value {value} is outside the open interval ({lo}, {hi})")]
    OutOfDomain { value: f64, lo: f64, hi: f64 },

    #[error("model specification: {0}")]
    Spec(String),

    #[error("unconstrained vector has length {found}, model layout needs {expected}")]
    Layout { expected: usize, found: usize },

    #[error("could not find a finite starting point after {attempts} attempts")]
    Initialization { attempts: usize },

    #[error("sampler configuration: {0}")]
    SamplerConfig(String),

    #[error("non-finite log-likelihood at draw {draw}, observation {obs}")]
    NonFiniteLogLik { draw: usize, obs: usize },

    #[error("interval lower bound {lower} exceeds upper bound {upper}")]
    InvertedInterval { lower: f64, upper: f64 },

    #[error("posterior draws are empty")]
    EmptyDraws,

    #[error("draws do not contain parameter `{0}`")]
    MissingParameter(String),

    #[error("cannot predict from a {0} fit")]
    Unpredictable(String),
}
