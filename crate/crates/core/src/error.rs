use thiserror::Error;

/// Errors produced by the ski-rental library.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid distribution: {0}")]
    InvalidDistribution(String),

    #[error("probabilities sum to {sum}, expected 1")]
    NotNormalized { sum: f64 },

    #[error("distribution has no support")]
    EmptySupport,

    #[error("invalid parameters: {0}")]
    InvalidParams(String),

    #[error("buy cost must be an integer >= 2, got {0}")]
    InvalidBuyCost(u64),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("survival mass at the buy day is zero; the ratio bound is undefined")]
    DegenerateTail,

    #[error("no robust policy exists for b = {b}, R = {r}")]
    Infeasible { b: u64, r: f64 },

    #[error("robustness target R = {r} does not map to a trust parameter in (0, 1] (raw value {raw})")]
    InvalidRobustness { r: f64, raw: f64 },

    #[error("LP horizon {horizon} exceeds the dense solver limit {limit}")]
    ScaleExceeded { horizon: u64, limit: u64 },

    #[error("linear program is {0}")]
    Lp(&'static str),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn check_buy_cost(b: u64) -> Result<()> {
    if b < 2 {
        return Err(Error::InvalidBuyCost(b));
    }
    Ok(())
}

pub(crate) fn check_ratio(r: f64) -> Result<()> {
    if !r.is_finite() || r <= 1.0 {
        return Err(Error::InvalidArgument(format!("robustness target must be finite and > 1, got {r}")));
    }
    Ok(())
}
