//! Crate-wide error type.

use thiserror::Error;

/// Errors produced by ingestion, modelling and solver layers.
#[derive(Debug, Error)]
pub enum Error {
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),

    #[error("missing column '{0}' in csv header")]
    MissingColumn(String),

    #[error("timestamps are not strictly increasing at row {row}")]
    NonMonotoneTimestamps { row: usize },

    #[error("irregular sample spacing at row {row} (expected {expected_hours} h, got {got_hours} h); pass an explicit step or enable gap filling")]
    IrregularSpacing {
        row: usize,
        expected_hours: f64,
        got_hours: f64,
    },

    #[error("cannot parse '{value}' in column '{column}' at row {row}")]
    BadCell {
        column: String,
        value: String,
        row: usize,
    },

    #[error("negative generation {value} at sample {index}")]
    NegativeGeneration { index: usize, value: f64 },

    #[error("series must contain at least one sample")]
    EmptySeries,

    #[error("length mismatch: expected {expected} samples, got {got}")]
    LengthMismatch { expected: usize, got: usize },

    #[error("new step {new_hours} h is not an integer multiple of {old_hours} h")]
    NonIntegerRatio { old_hours: f64, new_hours: f64 },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("battery energy {value} violates {side} bound {bound}")]
    BoundViolation {
        side: &'static str,
        value: f64,
        bound: f64,
    },

    #[error("total customers served must be positive")]
    NoCustomers,

    #[error("saidi {saidi} exceeds horizon {horizon}")]
    SaidiExceedsHorizon { saidi: f64, horizon: f64 },

    #[error("response model needs either epsilon or the full physical parameter set")]
    MissingResponseParameters,

    #[error("invalid problem: {0}")]
    InvalidProblem(String),

    #[error("initial stored energy {value} outside [{lo}, {hi}]")]
    InfeasibleInitialState { value: f64, lo: f64, hi: f64 },

    #[error("solver did not converge in {iterations} iterations (primal {primal:.3e}, dual {dual:.3e})")]
    NotConverged {
        iterations: usize,
        primal: f64,
        dual: f64,
    },

    #[error("horizon {n} exceeds the exact-solve cap {cap}; use the convex solver for long horizons")]
    HorizonTooLong { n: usize, cap: usize },

    #[error("horizon {n} exceeds oracle cap {cap}")]
    OracleHorizon { n: usize, cap: usize },

    #[error("invalid scenario: {0}")]
    InvalidScenario(String),
}

pub type Result<T> = std::result::Result<T, Error>;
