//! Error type shared by every module of the crate.

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("part {index} is not strictly positive (value {value})")]
    NonPositivePart { index: usize, value: f64 },

    #[error("a composition needs at least 2 parts, found {found}")]
    TooFewParts { found: usize },

    #[error("reference index {index} out of range for a {parts}-part composition")]
    RefIndexOutOfRange { index: usize, parts: usize },

    #[error("invalid logarithm base {0}: must be finite and > 1")]
    InvalidLogBase(f64),

    #[error("model requires a moderator but row {row} has none")]
    MissingModerator { row: usize },

    #[error("model requires an offset but row {row} has none")]
    MissingOffset { row: usize },

    #[error("row {row} has an invalid value {value} for the {what}")]
    InvalidValue { row: usize, what: &'static str, value: f64 },

    #[error("row {row} has {found} parts, expected {expected}")]
    InconsistentD { row: usize, expected: usize, found: usize },

    #[error("row {row} lacks the time key required for lagging")]
    MissingTimeKeys { row: usize },

    #[error("coefficients must sum to zero, got sum {sum:e}")]
    NotZeroSum { sum: f64 },

    #[error("design is rank deficient after constraint reduction (singular value ratio {ratio:e})")]
    RankDeficient { ratio: f64 },

    #[error("dimension mismatch for {what}: expected {expected}, found {found}")]
    DimensionMismatch {
        what: &'static str,
        expected: usize,
        found: usize,
    },

    #[error("unknown or empty coefficient block: {0}")]
    UnknownBlock(String),

    #[error("unknown column: {0}")]
    UnknownColumn(String),

    #[error("prior constraint mode is not soft")]
    NotSoftMode,

    #[error("prior constraint mode is not hard")]
    NotHardMode,

    #[error("invalid prior: {0}")]
    InvalidPrior(String),

    #[error("sampler produced a non-finite draw (chain {chain}, iteration {iteration})")]
    SamplerDivergence { chain: usize, iteration: usize },

    #[error("observation {index} is not an integer count ({value})")]
    NonIntegerCount { index: usize, value: f64 },

    #[error("observation {index} is a negative count ({value})")]
    NegativeCount { index: usize, value: f64 },

    #[error("optimizer did not converge: gradient norm {grad_norm:e} after {iterations} iterations")]
    NonConvergence { grad_norm: f64, iterations: usize },

    #[error("elasticities need a log response or a log link; this fit has level effects")]
    NotLogScale,

    #[error("log-link elasticities need natural-log covariates, model uses base {0}")]
    BaseMismatch(f64),

    #[error("model has no moderator")]
    NoModerator,

    #[error("missing column: {0}")]
    MissingColumn(String),

    #[error("cannot parse row {row}, column {column}: {value:?}")]
    Parse { row: usize, column: String, value: String },

    #[error("row {row}, part {part}: value {value} is not strictly positive")]
    NonPositivePartInRow { row: usize, part: String, value: f64 },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// Process exit code for the command-line front end, one per error class.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config(_) | Error::Json(_) | Error::InvalidLogBase(_) | Error::InvalidPrior(_) => 2,
            Error::Io(_) => 3,
            Error::MissingColumn(_) => 4,
            Error::Parse { .. } | Error::Csv(_) => 5,
            Error::NonPositivePart { .. }
            | Error::NonPositivePartInRow { .. }
            | Error::TooFewParts { .. }
            | Error::InconsistentD { .. }
            | Error::InvalidValue { .. }
            | Error::NonIntegerCount { .. }
            | Error::NegativeCount { .. } => 6,
            Error::MissingModerator { .. }
            | Error::MissingOffset { .. }
            | Error::MissingTimeKeys { .. }
            | Error::RefIndexOutOfRange { .. }
            | Error::DimensionMismatch { .. } => 7,
            Error::RankDeficient { .. } => 8,
            Error::NonConvergence { .. } | Error::SamplerDivergence { .. } => 9,
            Error::NotLogScale
            | Error::BaseMismatch(_)
            | Error::NoModerator
            | Error::NotZeroSum { .. }
            | Error::UnknownBlock(_)
            | Error::UnknownColumn(_)
            | Error::NotSoftMode
            | Error::NotHardMode => 10,
        }
    }
}
