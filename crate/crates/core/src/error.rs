use chrono::NaiveDate;
use thiserror::Error;

/// Errors raised by the pipeline stages.
#[derive(Debug, Error)]
pub enum Error {
    #[error("day trajectory must have {expected} slots, got {actual}")]
    SlotCount { expected: usize, actual: usize },

    #[error("invalid location code {0} (expected 0..=8)")]
    InvalidLocationCode(i64),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("resident {resident}: rows must share one resident id (found {found})")]
    MixedResident { resident: String, found: String },

    #[error("resident {resident}: dates must be strictly increasing ({date} is out of order or duplicated)")]
    DateOrder { resident: String, date: NaiveDate },

    #[error("rssi {0} dBm outside [-120, 0]")]
    RssiOutOfRange(i32),

    #[error("receiver {0} is not present in the receiver map")]
    UnknownReceiver(String),

    #[error("receiver map: {0}")]
    ReceiverMap(String),

    #[error("registry: {0}")]
    Registry(String),

    #[error("resident {0}: no residential-room dwell inside the night window")]
    NoOriginDetectable(String),

    #[error("resident {0}: no valid days to aggregate")]
    NoValidDays(String),

    #[error("symmetric eigensolver did not converge for a {n}x{n} Laplacian (tolerance {tolerance:e})")]
    EigenNonConvergence { n: usize, tolerance: f64 },

    #[error("resident {resident}: no hybrid norm for valid day {date}")]
    NormGap { resident: String, date: NaiveDate },

    #[error("need at least {needed} profiles to fit thresholds, got {got}")]
    TooFewProfiles { needed: usize, got: usize },

    #[error("cohort spec: {0}")]
    CohortSpec(String),

    #[error("{path}: line {line}: {message}")]
    Parse { path: String, line: usize, message: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// True for errors caused by malformed input or arguments rather than a
    /// failure while computing.
    pub fn is_validation(&self) -> bool {
        !matches!(
            self,
            Error::EigenNonConvergence { .. } | Error::Io(_) | Error::NoOriginDetectable(_)
        )
    }
}

pub type Result<T> = std::result::Result<T, Error>;
