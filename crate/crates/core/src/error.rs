use thiserror::Error;

use crate::montecarlo::CountRecord;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("quadrature did not converge: estimate {estimate} with error {error} (tolerance {tolerance})")]
    Numerical {
        estimate: f64,
        error: f64,
        tolerance: f64,
    },

    #[error("degenerate channel: {0}")]
    DegenerateChannel(String),

    #[error("time grid cannot resolve profile: {0}")]
    Resolution(String),

    #[error("visibility undefined: no coincidences at either fringe extremum")]
    UndefinedVisibility,

    #[error("outside the low-gain model: {quantity} = {value} exceeds {limit}")]
    OutOfModel {
        quantity: &'static str,
        value: f64,
        limit: f64,
    },

    #[error("insufficient data: {0}")]
    InsufficientData(String),

    #[error("degenerate input: {0}")]
    DegenerateInput(String),

    #[error("insufficient statistics: {reason}")]
    InsufficientStatistics {
        reason: String,
        partial: Vec<CountRecord>,
    },
}

pub(crate) fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<()> {
    if cond {
        Ok(())
    } else {
        Err(Error::InvalidParameter(msg()))
    }
}
