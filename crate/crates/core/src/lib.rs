//! Ski rental with distributional advice.
//!
//! A skier rents for 1 per day or buys once for `b`; the number of skiing days `D` is
//! unknown but a predicted distribution of it is available. This crate computes
//! deterministic threshold policies (optimal and clamped for robustness), randomized
//! stopping policies that are `R`-robust by construction (closed forms and
//! water-filling), point-prediction baselines, brute-force and LP oracles, and the
//! experiment runners.

pub mod baselines;
pub mod deterministic;
pub mod distributions;
pub mod error;
pub mod evaluation;
pub mod oracle;
pub mod randomized;

pub use error::{Error, Result};
