//! Point-prediction baselines adapted to distributional advice.
//!
//! Each branch is the standard randomized ski-rental distribution truncated at a
//! trust-dependent day: mass on day `i` of `1..=L` proportional to `((b-1)/b)^(L-i)`.

use serde::{Deserialize, Serialize};

use crate::distributions::DayDistribution;
use crate::error::{check_buy_cost, check_ratio, Error, Result};
use crate::randomized::StoppingDistribution;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BaselineKind {
    /// Pick the branch of the more likely side of `b`.
    MajorityBranch,
    /// Mix both branches by `Pr[D >= b]`.
    Mixture,
}

/// Rounding applied to a branch length.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Rounding {
    Floor,
    Ceil,
}

impl Rounding {
    fn apply(self, x: f64) -> u64 {
        let nearest = x.round();
        let x = if (x - nearest).abs() <= 1e-9 * nearest.max(1.0) { nearest } else { x };
        let v = match self {
            Rounding::Floor => x.floor(),
            Rounding::Ceil => x.ceil(),
        };
        (v as u64).max(1)
    }
}

/// Rounding of the short (`lambda * b`) and long (`b / lambda`) branch lengths.
///
/// The default floors the short length and ceils the long one.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct BranchRounding {
    pub short: Rounding,
    pub long: Rounding,
}

impl Default for BranchRounding {
    fn default() -> Self {
        Self { short: Rounding::Floor, long: Rounding::Ceil }
    }
}

/// Maps a robustness target to the trust parameter, `lambda = 1/b - ln(1 - (1 + 1/b)/R)`.
pub fn lambda_from_r(b: u64, r: f64) -> Result<f64> {
    check_buy_cost(b)?;
    check_ratio(r)?;
    let inv_b = 1.0 / b as f64;
    let arg = 1.0 - (1.0 + inv_b) / r;
    let raw = if arg > 0.0 { inv_b - arg.ln() } else { f64::INFINITY };
    if !(raw > 0.0 && raw <= 1.0) {
        return Err(Error::InvalidRobustness { r, raw });
    }
    Ok(raw)
}

/// Inverse of [`lambda_from_r`].
pub fn r_from_lambda(b: u64, lambda: f64) -> f64 {
    let inv_b = 1.0 / b as f64;
    (1.0 + inv_b) / (-(-(lambda - inv_b)).exp_m1())
}

/// Branch distribution with the default rounding.
pub fn trust_branch(b: u64, lambda: f64, high_branch: bool) -> Result<StoppingDistribution> {
    trust_branch_with(b, lambda, high_branch, BranchRounding::default())
}

/// Branch distribution: the high branch (prediction `>= b`) spans `1..=lambda*b`, the low
/// branch spans `1..=b/lambda`.
pub fn trust_branch_with(
    b: u64,
    lambda: f64,
    high_branch: bool,
    rounding: BranchRounding,
) -> Result<StoppingDistribution> {
    check_buy_cost(b)?;
    if !(lambda > 0.0 && lambda <= 1.0) {
        return Err(Error::InvalidArgument(format!("trust parameter must lie in (0, 1], got {lambda}")));
    }
    let bf = b as f64;
    let len = if high_branch { rounding.short.apply(lambda * bf) } else { rounding.long.apply(bf / lambda) };
    let decay = ((bf - 1.0) / bf).ln();
    let norm = -bf * (len as f64 * decay).exp_m1();
    StoppingDistribution::new((1..=len).map(|i| (i, ((len - i) as f64 * decay).exp() / norm)))
}

/// Baseline policy for prediction `p_hat` at robustness target `R`.
pub fn baseline_policy(p_hat: &DayDistribution, b: u64, r: f64, kind: BaselineKind) -> Result<StoppingDistribution> {
    baseline_policy_with(p_hat, b, r, kind, BranchRounding::default())
}

pub fn baseline_policy_with(
    p_hat: &DayDistribution,
    b: u64,
    r: f64,
    kind: BaselineKind,
    rounding: BranchRounding,
) -> Result<StoppingDistribution> {
    let lambda = lambda_from_r(b, r)?;
    let above = p_hat.survival(b);
    let high = || trust_branch_with(b, lambda, true, rounding);
    let low = || trust_branch_with(b, lambda, false, rounding);
    match kind {
        BaselineKind::MajorityBranch => {
            if above > 0.5 {
                high()
            } else {
                low()
            }
        }
        BaselineKind::Mixture => {
            if above >= 1.0 {
                return high();
            }
            if above <= 0.0 {
                return low();
            }
            Ok(mix(&high()?, &low()?, above)?)
        }
    }
}

/// Pointwise `w * q + (1 - w) * r`.
pub fn mix(q: &StoppingDistribution, r: &StoppingDistribution, w: f64) -> Result<StoppingDistribution> {
    let mut out: std::collections::BTreeMap<u64, f64> = std::collections::BTreeMap::new();
    for &(d, m) in q.pmf() {
        *out.entry(d).or_default() += w * m;
    }
    for &(d, m) in r.pmf() {
        *out.entry(d).or_default() += (1.0 - w) * m;
    }
    StoppingDistribution::new(out)
}
