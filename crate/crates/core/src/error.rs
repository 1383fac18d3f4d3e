use std::path::PathBuf;

/// Errors produced by the estimation engine and its tooling.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    /// A value handed to an operation is unusable (non-finite, out of range, empty).
    #[error("invalid input: {0}")]
    Input(String),

    /// A configuration object violates its invariants.
    #[error("invalid configuration: {0}")]
    Config(String),

    /// Not enough samples to compute a statistic.
    #[error("insufficient data: {0}")]
    InsufficientData(&'static str),

    /// No rule fires for the queried inputs.
    #[error("uncovered input: no rule fires at mean={mean}, std={std}")]
    UncoveredInput { mean: f64, std: f64 },

    /// An aggregated output curve carries no mass to defuzzify.
    #[error("aggregated membership curve is identically zero")]
    ZeroAggregate,

    /// Attitude channels are missing from the frames.
    #[error("attitude unavailable")]
    AttitudeUnavailable,

    /// The literal difference-of-squares attitude error has a negative radicand.
    #[error("negative radicand in difference-of-squares attitude error: {0}")]
    NegativeRadicand(f64),

    /// CSV or JSON could not be parsed.
    #[error("{path}:{line}: {msg}")]
    Parse {
        path: PathBuf,
        line: u64,
        msg: String,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
