//! Deterministic threshold policies: rent for `t - 1` days, buy on day `t`.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::distributions::{total_variation, wasserstein1, DayDistribution};
use crate::error::{check_buy_cost, Error, Result};

/// Buy day of a deterministic policy.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Threshold {
    Day(u64),
    #[serde(with = "never_tag")]
    Never,
}

mod never_tag {
    use serde::{de, Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str("never")
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<(), D::Error> {
        let tag = String::deserialize(d)?;
        if tag == "never" {
            Ok(())
        } else {
            Err(de::Error::custom(format!("expected \"never\", got {tag:?}")))
        }
    }
}

impl Threshold {
    pub fn day(self) -> Option<u64> {
        match self {
            Threshold::Day(t) => Some(t),
            Threshold::Never => None,
        }
    }
}

impl fmt::Display for Threshold {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Threshold::Day(t) => write!(f, "{t}"),
            Threshold::Never => f.write_str("never"),
        }
    }
}

/// Cost of threshold `t` when skiing lasts `d` days.
pub fn threshold_cost(b: u64, t: Threshold, d: u64) -> f64 {
    match t {
        Threshold::Day(t) if t <= d => (t - 1 + b) as f64,
        _ => d as f64,
    }
}

fn finite_cost(p: &DayDistribution, b: u64, t: u64) -> f64 {
    let below: f64 = p.atoms().iter().take_while(|&&(d, _)| d < t).map(|&(d, q)| d as f64 * q).sum();
    below + p.survival(t) * (b + t - 1) as f64
}

/// Expected cost `E[C_t(D)]` of a threshold policy.
pub fn expected_cost_threshold(p: &DayDistribution, b: u64, t: Threshold) -> Result<f64> {
    check_buy_cost(b)?;
    Ok(match t {
        Threshold::Day(0) => return Err(Error::InvalidArgument("threshold must be >= 1".into())),
        Threshold::Day(t) => finite_cost(p, b, t),
        Threshold::Never => p.mean(),
    })
}

/// Cost-minimizing threshold under `p`, found in one pass over `1..=max_day + 1`.
///
/// Ties go to the smallest day; `Never` wins only on strict improvement.
pub fn optimal_threshold(p: &DayDistribution, b: u64) -> Result<(Threshold, f64)> {
    check_buy_cost(b)?;
    let atoms = p.atoms();
    let mut idx = 0;
    let mut rented = 0.0;
    let mut tail = 1.0;
    let mut best = (Threshold::Day(1), f64::INFINITY);
    for t in 1..=p.max_day() + 1 {
        while idx < atoms.len() && atoms[idx].0 < t {
            rented += atoms[idx].0 as f64 * atoms[idx].1;
            tail -= atoms[idx].1;
            idx += 1;
        }
        let cost = rented + tail.max(0.0) * (b + t - 1) as f64;
        if cost < best.1 {
            best = (Threshold::Day(t), cost);
        }
    }
    let never = p.mean();
    if never < best.1 {
        best = (Threshold::Never, never);
    }
    Ok(best)
}

fn tail_ratio(p: &DayDistribution, b: u64, t: u64) -> Result<f64> {
    let at_b = p.survival(b);
    if at_b <= 0.0 {
        return Err(Error::DegenerateTail);
    }
    Ok(p.survival(t) / at_b)
}

fn finite_threshold(t: Threshold) -> Result<u64> {
    match t {
        Threshold::Day(t) if t >= 1 => Ok(t),
        _ => Err(Error::InvalidArgument("a finite threshold >= 1 is required".into())),
    }
}

/// Competitive-ratio bound for an early buyer (`t <= b`).
pub fn cr_bound_early(p: &DayDistribution, b: u64, t: Threshold) -> Result<f64> {
    check_buy_cost(b)?;
    let t = finite_threshold(t)?;
    if t > b {
        return Err(Error::InvalidArgument(format!("early bound needs t <= b, got t = {t}, b = {b}")));
    }
    let r = tail_ratio(p, b, t)?;
    let (bf, tf) = (b as f64, t as f64);
    Ok(1.0 + ((bf - 1.0) * r - (bf - tf)) / (tf * r + (bf - tf)))
}

/// Competitive-ratio bound for a late buyer (`t > b`).
pub fn cr_bound_late(p: &DayDistribution, b: u64, t: Threshold) -> Result<f64> {
    check_buy_cost(b)?;
    let t = finite_threshold(t)?;
    if t <= b {
        return Err(Error::InvalidArgument(format!("late bound needs t > b, got t = {t}, b = {b}")));
    }
    let r = tail_ratio(p, b, t)?;
    Ok((t - 1) as f64 / b as f64 + r)
}

/// Checks the sufficient conditions for threshold `t = alpha * b` to be `C`-competitive.
///
/// The early-buy condition is reported as not holding when its denominator is not
/// positive. At `alpha = 1` either condition suffices.
pub fn sufficient_condition_check(p: &DayDistribution, b: u64, t: Threshold, c: f64) -> Result<bool> {
    check_buy_cost(b)?;
    let t = finite_threshold(t)?;
    if c.is_nan() || c <= 1.0 {
        return Err(Error::InvalidArgument(format!("target ratio must exceed 1, got {c}")));
    }
    let r = tail_ratio(p, b, t)?;
    let bf = b as f64;
    let alpha = t as f64 / bf;
    let early = || {
        let denom = 1.0 - 1.0 / bf - (c - 1.0) * alpha;
        denom > 0.0 && r <= c * (1.0 - alpha) / denom
    };
    let late = || r <= c - alpha + 1.0 / bf;
    Ok(match t.cmp(&b) {
        std::cmp::Ordering::Less => early(),
        std::cmp::Ordering::Greater => late(),
        std::cmp::Ordering::Equal => early() || late(),
    })
}

/// `ceil`/`floor` that snap values within `1e-9` of an integer, so `50 * (1/3)` rounds as intended.
fn snapped(x: f64) -> f64 {
    let nearest = x.round();
    if (x - nearest).abs() <= 1e-9 * nearest.abs().max(1.0) {
        nearest
    } else {
        x
    }
}

fn check_lambda(lambda: f64) -> Result<()> {
    if !(lambda > 0.0 && lambda <= 1.0) {
        return Err(Error::InvalidArgument(format!("trust parameter must lie in (0, 1], got {lambda}")));
    }
    Ok(())
}

/// Range `[ceil(lambda * b), floor(b / lambda)]` the clamp policy allows.
pub fn clamp_range(b: u64, lambda: f64) -> Result<(u64, u64)> {
    check_buy_cost(b)?;
    check_lambda(lambda)?;
    let lo = (snapped(lambda * b as f64).ceil() as u64).max(1);
    let hi = snapped(b as f64 / lambda).floor() as u64;
    Ok((lo, hi.max(lo)))
}

/// Clamps a predicted threshold into the trust range; `Never` maps to the upper end.
pub fn clamp_threshold(t_hat: Threshold, b: u64, lambda: f64) -> Result<Threshold> {
    let (lo, hi) = clamp_range(b, lambda)?;
    Ok(Threshold::Day(match t_hat {
        Threshold::Day(t) => t.clamp(lo, hi),
        Threshold::Never => hi,
    }))
}

/// Distance used to measure prediction error.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Metric {
    Wasserstein,
    Tv,
}

impl Metric {
    pub fn distance(self, p: &DayDistribution, q: &DayDistribution) -> f64 {
        match self {
            Metric::Wasserstein => wasserstein1(p, q),
            Metric::Tv => total_variation(p, q),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Binding {
    Robust,
    Consistent,
}

/// Robustness and consistency guarantees of the clamp policy.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundReport {
    pub predicted_threshold: Threshold,
    pub clamped_threshold: Threshold,
    pub robust_term: f64,
    pub consistent_term: Option<f64>,
    pub binding: Binding,
    pub theta: Option<f64>,
    pub rho_hat: f64,
}

impl BoundReport {
    pub fn bound(&self) -> f64 {
        match (self.binding, self.consistent_term) {
            (Binding::Consistent, Some(c)) => c,
            _ => self.robust_term,
        }
    }
}

/// Guarantee of the clamp policy built from `p_hat`, for a truth within `eta` of it.
pub fn robust_consistent_bound(
    p_hat: &DayDistribution,
    b: u64,
    lambda: f64,
    eta: f64,
    metric: Metric,
) -> Result<BoundReport> {
    check_buy_cost(b)?;
    check_lambda(lambda)?;
    if !eta.is_finite() || eta < 0.0 {
        return Err(Error::InvalidArgument(format!("eta must be finite and >= 0, got {eta}")));
    }
    let (t_hat, _) = optimal_threshold(p_hat, b)?;
    let t_tilde = clamp_threshold(t_hat, b, lambda)?;
    let opt_hat = p_hat.expected_opt(b);
    let rho_hat = expected_cost_threshold(p_hat, b, t_tilde)? / opt_hat;
    let bf = b as f64;
    let robust_term = 1.0 + 1.0 / lambda - 1.0 / bf;

    let (theta, consistent_term) = match metric {
        Metric::Wasserstein => {
            let theta = eta / opt_hat;
            if theta < 1.0 {
                (Some(theta), Some((rho_hat + bf * theta) / (1.0 - theta)))
            } else {
                (None, None)
            }
        }
        Metric::Tv => {
            let theta = bf * eta / opt_hat;
            if theta < 1.0 {
                let t = t_tilde.day().expect("clamped threshold is finite") as f64;
                let spill = eta * (bf + t - 1.0) / opt_hat;
                (Some(theta), Some((rho_hat + spill) / (1.0 - theta)))
            } else {
                (None, None)
            }
        }
    };
    let binding = match consistent_term {
        Some(c) if c < robust_term => Binding::Consistent,
        _ => Binding::Robust,
    };
    Ok(BoundReport {
        predicted_threshold: t_hat,
        clamped_threshold: t_tilde,
        robust_term,
        consistent_term,
        binding,
        theta,
        rho_hat,
    })
}

/// Expected competitive ratio `E[C_t] / OPT(p)`.
pub fn exact_ecr(p: &DayDistribution, b: u64, t: Threshold) -> Result<f64> {
    Ok(expected_cost_threshold(p, b, t)? / p.expected_opt(b))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn worked() -> DayDistribution {
        DayDistribution::new([(1, 0.8), (5, 0.2)]).unwrap()
    }

    #[test]
    fn worked_example_costs() {
        let p = worked();
        let expect = [3.0, 1.6, 1.8, 2.0, 2.2, 1.8];
        for (t, want) in (1..=6).zip(expect) {
            let got = expected_cost_threshold(&p, 3, Threshold::Day(t)).unwrap();
            assert!((got - want).abs() < 1e-12, "t = {t}: {got}");
        }
        assert!((expected_cost_threshold(&p, 3, Threshold::Never).unwrap() - 1.8).abs() < 1e-12);
        let (t, v) = optimal_threshold(&p, 3).unwrap();
        assert_eq!(t, Threshold::Day(2));
        assert!((v - 1.6).abs() < 1e-12);
        assert!((exact_ecr(&p, 3, Threshold::Day(2)).unwrap() - 1.6 / 1.4).abs() < 1e-12);
    }

    #[test]
    fn point_masses() {
        let p = DayDistribution::point(20).unwrap();
        assert_eq!(optimal_threshold(&p, 5).unwrap(), (Threshold::Day(1), 5.0));
        // Renting through the single skiing day ties with never buying; the finite day wins.
        let q = DayDistribution::point(3).unwrap();
        assert_eq!(optimal_threshold(&q, 5).unwrap(), (Threshold::Day(4), 3.0));
        assert_eq!(exact_ecr(&q, 5, Threshold::Day(4)).unwrap(), 1.0);
    }

    #[test]
    fn bounds() {
        let p = worked();
        assert!((cr_bound_early(&p, 3, Threshold::Day(2)).unwrap() - 4.0 / 3.0).abs() < 1e-12);
        assert!((cr_bound_early(&p, 3, Threshold::Day(3)).unwrap() - (2.0 - 1.0 / 3.0)).abs() < 1e-12);
        assert!((cr_bound_late(&p, 3, Threshold::Day(6)).unwrap() - 5.0 / 3.0).abs() < 1e-12);
        assert!((cr_bound_late(&p, 3, Threshold::Day(4)).unwrap() - 2.0).abs() < 1e-12);
        let short = DayDistribution::point(2).unwrap();
        assert_eq!(cr_bound_early(&short, 3, Threshold::Day(1)), Err(Error::DegenerateTail));
        assert!(cr_bound_early(&p, 3, Threshold::Day(4)).is_err());
        assert!(cr_bound_late(&p, 3, Threshold::Never).is_err());
    }

    #[test]
    fn sufficient_conditions_at_alpha_one() {
        let c = std::f64::consts::E / (std::f64::consts::E - 1.0);
        let p = DayDistribution::point(100).unwrap();
        assert!(sufficient_condition_check(&p, 2, Threshold::Day(2), c).unwrap());
        assert!(!sufficient_condition_check(&p, 3, Threshold::Day(3), c).unwrap());
        // S(t) = 0 satisfies the late condition whenever alpha <= C + 1/b.
        let q = DayDistribution::new([(10, 0.5), (20, 0.5)]).unwrap();
        assert!(sufficient_condition_check(&q, 10, Threshold::Day(21), 2.5).unwrap());
    }

    #[test]
    fn clamp() {
        let third = 1.0 / 3.0;
        assert_eq!(clamp_threshold(Threshold::Day(1), 50, third).unwrap(), Threshold::Day(17));
        assert_eq!(clamp_threshold(Threshold::Day(60), 50, third).unwrap(), Threshold::Day(60));
        assert_eq!(clamp_threshold(Threshold::Never, 50, third).unwrap(), Threshold::Day(150));
        assert_eq!(clamp_threshold(Threshold::Day(9), 6, third).unwrap(), Threshold::Day(9));
        assert!(clamp_threshold(Threshold::Day(1), 50, 0.0).is_err());
    }

    #[test]
    fn bound_report() {
        let p = DayDistribution::new([(10, 0.5), (80, 0.5)]).unwrap();
        let third = 1.0 / 3.0;
        let exact = robust_consistent_bound(&p, 50, third, 0.0, Metric::Wasserstein).unwrap();
        assert!((exact.robust_term - 3.98).abs() < 1e-12);
        assert_eq!(exact.consistent_term, Some(exact.rho_hat));
        assert_eq!(exact.binding, Binding::Consistent);
        let far = robust_consistent_bound(&p, 50, third, 1e3, Metric::Wasserstein).unwrap();
        assert_eq!(far.consistent_term, None);
        assert_eq!(far.binding, Binding::Robust);
        let tv = robust_consistent_bound(&p, 50, third, 0.9, Metric::Tv).unwrap();
        assert_eq!(tv.consistent_term, None);
    }

    #[test]
    fn threshold_json() {
        assert_eq!(serde_json::to_string(&Threshold::Day(4)).unwrap(), "4");
        assert_eq!(serde_json::to_string(&Threshold::Never).unwrap(), "\"never\"");
        assert_eq!(serde_json::from_str::<Threshold>("\"never\"").unwrap(), Threshold::Never);
        assert_eq!(serde_json::from_str::<Threshold>("7").unwrap(), Threshold::Day(7));
    }
}
