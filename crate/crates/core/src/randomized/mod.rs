//! Randomized stopping policies: the buy day is drawn from a distribution `f`.
//!
//! Robustness to a target ratio `R` reduces to linear constraints on the CDF
//! `F(x)` and the first moment `mu(x) = sum_{t <= x} (t - 1) f(t)`.

mod closed_form;
mod cost;
mod water_fill;

pub use closed_form::{
    envelope, extension_condition_check, full_mass_day, geometric_cdf, onehot_exact, OneHotSolution,
};
pub use cost::{build_cost_function, CostFunction, Segment};
pub use water_fill::{default_epsilon, is_level_feasible, water_fill, WaterFill};

use serde::{Deserialize, Serialize};

use crate::distributions::NORMALIZATION_TOL;
use crate::error::{check_buy_cost, check_ratio, Error, Result};

/// Slack tolerance for robustness constraints.
pub const SLACK_TOL: f64 = 1e-9;

/// Distribution over buy days with cached CDF and first moment.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StoppingDistribution {
    pmf: Vec<(u64, f64)>,
    #[serde(skip)]
    cdf: Vec<f64>,
    #[serde(skip)]
    moment: Vec<f64>,
}

impl StoppingDistribution {
    /// Builds a policy from `(day, mass)` pairs; zero masses are dropped.
    pub fn new(pmf: impl IntoIterator<Item = (u64, f64)>) -> Result<Self> {
        let mut pmf: Vec<(u64, f64)> = pmf.into_iter().collect();
        for &(day, mass) in &pmf {
            if day == 0 {
                return Err(Error::InvalidDistribution("buy days must be >= 1".into()));
            }
            if !mass.is_finite() || mass < 0.0 {
                return Err(Error::InvalidDistribution(format!(
                    "mass {mass} on day {day} is not a finite nonnegative number"
                )));
            }
        }
        pmf.sort_by_key(|&(d, _)| d);
        if let Some(w) = pmf.windows(2).find(|w| w[0].0 == w[1].0) {
            return Err(Error::InvalidDistribution(format!("duplicate buy day {}", w[0].0)));
        }
        pmf.retain(|&(_, m)| m > 0.0);
        let sum: f64 = pmf.iter().map(|&(_, m)| m).sum();
        if pmf.is_empty() {
            return Err(Error::EmptySupport);
        }
        if (sum - 1.0).abs() > NORMALIZATION_TOL {
            return Err(Error::NotNormalized { sum });
        }
        if (sum - 1.0).abs() > 1e-12 {
            for atom in &mut pmf {
                atom.1 /= sum;
            }
        }
        Ok(Self::from_sorted(pmf))
    }

    /// Deterministic policy buying on `day`.
    pub fn point(day: u64) -> Result<Self> {
        Self::new([(day, 1.0)])
    }

    fn from_sorted(pmf: Vec<(u64, f64)>) -> Self {
        let mut cdf = Vec::with_capacity(pmf.len());
        let mut moment = Vec::with_capacity(pmf.len());
        let (mut f, mut mu) = (0.0, 0.0);
        for &(d, m) in &pmf {
            f += m;
            mu += (d - 1) as f64 * m;
            cdf.push(f.min(1.0));
            moment.push(mu);
        }
        Self { pmf, cdf, moment }
    }

    pub fn pmf(&self) -> &[(u64, f64)] {
        &self.pmf
    }

    pub fn max_day(&self) -> u64 {
        self.pmf.last().map_or(0, |&(d, _)| d)
    }

    fn prefix(&self, x: u64) -> usize {
        self.pmf.partition_point(|&(d, _)| d <= x)
    }

    /// `F(x) = Pr[Z <= x]`.
    pub fn cdf(&self, x: u64) -> f64 {
        match self.prefix(x) {
            0 => 0.0,
            i => self.cdf[i - 1],
        }
    }

    /// `mu(x) = sum_{t <= x} (t - 1) f(t)`.
    pub fn moment(&self, x: u64) -> f64 {
        match self.prefix(x) {
            0 => 0.0,
            i => self.moment[i - 1],
        }
    }

    /// `mu(infinity)`.
    pub fn total_moment(&self) -> f64 {
        self.moment.last().copied().unwrap_or(0.0)
    }

    /// Expected cost when skiing lasts `x` days: `mu(x) + (b - x) F(x) + x`.
    pub fn expected_cost_at(&self, b: u64, x: u64) -> f64 {
        self.moment(x) + (b as f64 - x as f64) * self.cdf(x) + x as f64
    }
}

impl<'de> Deserialize<'de> for StoppingDistribution {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        struct Raw {
            pmf: Vec<(u64, f64)>,
        }
        let raw = Raw::deserialize(deserializer)?;
        StoppingDistribution::new(raw.pmf).map_err(serde::de::Error::custom)
    }
}

/// Serialized form of a randomized policy.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PolicyRecord {
    pub pmf: Vec<(u64, f64)>,
    pub b: u64,
    #[serde(rename = "R")]
    pub r: f64,
    pub objective: f64,
}

impl PolicyRecord {
    pub fn new(policy: &StoppingDistribution, b: u64, r: f64, objective: f64) -> Self {
        Self { pmf: policy.pmf().to_vec(), b, r, objective }
    }

    pub fn policy(&self) -> Result<StoppingDistribution> {
        StoppingDistribution::new(self.pmf.iter().copied())
    }
}

/// Constraint slacks of a policy against target ratio `R`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RobustnessReport {
    pub per_day_slack: Vec<(u64, f64)>,
    pub tail_slack: f64,
    pub feasible: bool,
}

impl RobustnessReport {
    pub fn min_slack(&self) -> f64 {
        self.per_day_slack.iter().map(|&(_, s)| s).fold(self.tail_slack, f64::min)
    }

    /// First violated constraint: `Some(x)` for a per-day constraint, `Some(0)` for the tail.
    pub fn first_violation(&self) -> Option<u64> {
        self.per_day_slack
            .iter()
            .find(|&&(_, s)| s < -SLACK_TOL)
            .map(|&(x, _)| x)
            .or((self.tail_slack < -SLACK_TOL).then_some(0))
    }
}

/// Evaluates the per-day and tail-moment constraints that make `f` `R`-robust.
pub fn check_robustness(f: &StoppingDistribution, b: u64, r: f64) -> Result<RobustnessReport> {
    check_buy_cost(b)?;
    check_ratio(r)?;
    let per_day_slack: Vec<(u64, f64)> =
        (1..b).map(|x| (x, (r - 1.0) * x as f64 - (f.expected_cost_at(b, x) - x as f64))).collect();
    let tail_slack = (r - 1.0) * b as f64 - f.total_moment();
    let feasible = tail_slack >= -SLACK_TOL && per_day_slack.iter().all(|&(_, s)| s >= -SLACK_TOL);
    Ok(RobustnessReport { per_day_slack, tail_slack, feasible })
}

/// Largest ratio `E[C_Z(x)] / min(x, b)` over `x in 1..=horizon`.
pub fn realized_worst_ratio(f: &StoppingDistribution, b: u64, horizon: u64) -> Result<f64> {
    check_buy_cost(b)?;
    if horizon < b {
        return Err(Error::InvalidArgument(format!("horizon {horizon} must be >= b = {b}")));
    }
    let pmf = f.pmf();
    let (mut idx, mut cdf, mut mu) = (0, 0.0, 0.0);
    let mut worst = f64::NEG_INFINITY;
    for x in 1..=horizon {
        while idx < pmf.len() && pmf[idx].0 <= x {
            cdf += pmf[idx].1;
            mu += (pmf[idx].0 - 1) as f64 * pmf[idx].1;
            idx += 1;
        }
        let cost = mu + (b as f64 - x as f64) * cdf + x as f64;
        worst = worst.max(cost / x.min(b) as f64);
    }
    Ok(worst)
}

/// `sum_z g(z) f(z)`.
pub fn expected_policy_cost(f: &StoppingDistribution, g: &CostFunction) -> f64 {
    f.pmf().iter().map(|&(z, m)| g.eval(z) * m).sum()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn buy_on_day_b() {
        let f = StoppingDistribution::point(4).unwrap();
        let report = check_robustness(&f, 4, 2.0).unwrap();
        assert!(report.feasible);
        assert_eq!(report.tail_slack, 1.0);
        for &(x, s) in &report.per_day_slack {
            assert_eq!(s, x as f64);
        }
    }

    #[test]
    fn buy_immediately() {
        let f = StoppingDistribution::point(1).unwrap();
        assert!(check_robustness(&f, 5, 5.0).unwrap().feasible);
        let tight = check_robustness(&f, 5, 4.5).unwrap();
        assert!(!tight.feasible);
        assert_eq!(tight.first_violation(), Some(1));
        assert_eq!(realized_worst_ratio(&f, 5, 20).unwrap(), 5.0);
    }

    #[test]
    fn caches_match_pmf() {
        let f = StoppingDistribution::new([(3, 0.25), (1, 0.5), (7, 0.25)]).unwrap();
        assert_eq!(f.cdf(0), 0.0);
        assert_eq!(f.cdf(2), 0.5);
        assert_eq!(f.cdf(100), 1.0);
        assert_eq!(f.moment(3), 0.5);
        assert_eq!(f.total_moment(), 2.0);
        assert!(StoppingDistribution::new([(1, 0.5)]).is_err());
        assert!(realized_worst_ratio(&f, 5, 4).is_err());
    }

    #[test]
    fn policy_json_round_trip() {
        let f = StoppingDistribution::new([(1, 0.5), (3, 0.5)]).unwrap();
        let record = PolicyRecord::new(&f, 4, 2.0, 3.5);
        let text = serde_json::to_string(&record).unwrap();
        assert!(text.contains("\"R\":2.0"));
        let back: PolicyRecord = serde_json::from_str(&text).unwrap();
        assert_eq!(back.policy().unwrap(), f);
    }
}
