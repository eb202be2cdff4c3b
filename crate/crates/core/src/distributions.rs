//! Finite discrete distributions over skiing days.
//!
//! A [`DayDistribution`] is an immutable, sorted list of `(day, prob)` atoms with
//! cached suffix sums, so survival and CDF queries are `O(log n)`.

use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{check_buy_cost, Error, Result};

/// Tolerance on the total mass accepted at construction.
pub const NORMALIZATION_TOL: f64 = 1e-9;
const RENORMALIZE_DRIFT: f64 = 1e-12;

/// A normalized probability distribution over days `1..=max_day`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DayDistribution {
    atoms: Vec<(u64, f64)>,
    #[serde(skip)]
    suffix: Vec<f64>,
}

impl DayDistribution {
    /// Builds a distribution from `(day, prob)` pairs.
    ///
    /// Atoms may come in any order; zero-probability atoms are dropped. Days must be
    /// distinct and `>= 1`, probabilities finite and nonnegative, summing to 1 within
    /// [`NORMALIZATION_TOL`].
    pub fn new(atoms: impl IntoIterator<Item = (u64, f64)>) -> Result<Self> {
        let mut atoms: Vec<(u64, f64)> = atoms.into_iter().collect();
        for &(day, prob) in &atoms {
            if day == 0 {
                return Err(Error::InvalidDistribution("days must be >= 1".into()));
            }
            if !prob.is_finite() || prob < 0.0 {
                return Err(Error::InvalidDistribution(format!(
                    "probability {prob} on day {day} is not a finite nonnegative number"
                )));
            }
        }
        atoms.sort_by_key(|&(day, _)| day);
        if let Some(w) = atoms.windows(2).find(|w| w[0].0 == w[1].0) {
            return Err(Error::InvalidDistribution(format!("duplicate day {}", w[0].0)));
        }
        atoms.retain(|&(_, prob)| prob > 0.0);
        if atoms.is_empty() {
            return Err(Error::EmptySupport);
        }
        let sum: f64 = atoms.iter().map(|&(_, p)| p).sum();
        if (sum - 1.0).abs() > NORMALIZATION_TOL {
            return Err(Error::NotNormalized { sum });
        }
        if (sum - 1.0).abs() > RENORMALIZE_DRIFT {
            for atom in &mut atoms {
                atom.1 /= sum;
            }
        }
        Ok(Self::from_sorted(atoms))
    }

    /// Normalizes nonnegative weights into a distribution.
    pub fn from_weights(weights: impl IntoIterator<Item = (u64, f64)>) -> Result<Self> {
        let weights: Vec<(u64, f64)> = weights.into_iter().collect();
        let total: f64 = weights.iter().map(|&(_, w)| w).sum();
        if !total.is_finite() {
            return Err(Error::InvalidDistribution("weights are not finite".into()));
        }
        if total <= 0.0 {
            return Err(Error::EmptySupport);
        }
        Self::new(weights.into_iter().map(|(d, w)| (d, w / total)))
    }

    /// Point mass on `day`.
    pub fn point(day: u64) -> Result<Self> {
        Self::new([(day, 1.0)])
    }

    fn from_sorted(atoms: Vec<(u64, f64)>) -> Self {
        let mut suffix = vec![0.0; atoms.len() + 1];
        for i in (0..atoms.len()).rev() {
            suffix[i] = suffix[i + 1] + atoms[i].1;
        }
        Self { atoms, suffix }
    }

    pub fn atoms(&self) -> &[(u64, f64)] {
        &self.atoms
    }

    pub fn len(&self) -> usize {
        self.atoms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.atoms.is_empty()
    }

    /// Largest day carrying positive mass.
    pub fn max_day(&self) -> u64 {
        self.atoms.last().map_or(0, |&(d, _)| d)
    }

    pub fn min_day(&self) -> u64 {
        self.atoms.first().map_or(0, |&(d, _)| d)
    }

    pub fn prob(&self, day: u64) -> f64 {
        self.atoms.binary_search_by_key(&day, |&(d, _)| d).map_or(0.0, |i| self.atoms[i].1)
    }

    pub fn mean(&self) -> f64 {
        self.atoms.iter().map(|&(d, p)| d as f64 * p).sum()
    }

    /// `Pr[D >= t]`.
    pub fn survival(&self, t: u64) -> f64 {
        let idx = self.atoms.partition_point(|&(d, _)| d < t);
        if idx == 0 {
            1.0
        } else {
            self.suffix[idx].clamp(0.0, 1.0)
        }
    }

    /// `Pr[D <= x]`.
    pub fn cdf(&self, x: u64) -> f64 {
        1.0 - self.survival(x + 1)
    }

    /// Expected offline optimum `E[min(D, b)]`.
    pub fn expected_opt(&self, b: u64) -> f64 {
        let below: f64 = self.atoms.iter().take_while(|&&(d, _)| d < b).map(|&(d, p)| d as f64 * p).sum();
        below + b as f64 * self.survival(b)
    }
}

impl<'de> Deserialize<'de> for DayDistribution {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        struct Raw {
            atoms: Vec<(u64, f64)>,
        }
        let raw = Raw::deserialize(deserializer)?;
        DayDistribution::new(raw.atoms).map_err(serde::de::Error::custom)
    }
}

/// `Pr[D >= t]` for `t >= 1`.
pub fn survival(p: &DayDistribution, t: u64) -> f64 {
    p.survival(t)
}

/// `E[min(D, b)]`.
pub fn expected_opt(p: &DayDistribution, b: u64) -> Result<f64> {
    check_buy_cost(b)?;
    Ok(p.expected_opt(b))
}

/// Merges two supports, calling `visit(day, p_mass, q_mass)` in increasing day order.
fn merge_supports(p: &DayDistribution, q: &DayDistribution, mut visit: impl FnMut(u64, f64, f64)) {
    let (a, b) = (p.atoms(), q.atoms());
    let (mut i, mut j) = (0, 0);
    while i < a.len() || j < b.len() {
        let da = a.get(i).map_or(u64::MAX, |x| x.0);
        let db = b.get(j).map_or(u64::MAX, |x| x.0);
        if da == db {
            visit(da, a[i].1, b[j].1);
            i += 1;
            j += 1;
        } else if da < db {
            visit(da, a[i].1, 0.0);
            i += 1;
        } else {
            visit(db, 0.0, b[j].1);
            j += 1;
        }
    }
}

/// Earth mover's distance with ground metric `|i - j|`, exact on the integer line.
pub fn wasserstein1(p: &DayDistribution, q: &DayDistribution) -> f64 {
    let mut total = 0.0;
    let mut gap = 0.0_f64;
    let mut last_day: Option<u64> = None;
    merge_supports(p, q, |day, pm, qm| {
        if let Some(prev) = last_day {
            total += (day - prev) as f64 * gap.abs();
        }
        gap += pm - qm;
        last_day = Some(day);
    });
    total
}

/// Half the L1 distance between the two mass functions.
pub fn total_variation(p: &DayDistribution, q: &DayDistribution) -> f64 {
    let mut l1 = 0.0;
    merge_supports(p, q, |_, pm, qm| l1 += (pm - qm).abs());
    (0.5 * l1).min(1.0)
}

/// Randomly transports mass of `p` with total cost at most `eta`.
///
/// Each move picks a source atom, a signed shift with magnitude uniform in
/// `1..=ceil(eta)` and a mass no larger than the atom or the remaining budget allows.
/// Destinations are clamped to day 1. At most `10 * n` moves are attempted.
pub fn perturb_wasserstein(p: &DayDistribution, eta: f64, seed: u64) -> Result<DayDistribution> {
    if !eta.is_finite() || eta < 0.0 {
        return Err(Error::InvalidArgument(format!("eta must be finite and >= 0, got {eta}")));
    }
    if eta == 0.0 {
        return Ok(p.clone());
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut mass: BTreeMap<u64, f64> = p.atoms().iter().copied().collect();
    let max_shift = eta.ceil() as u64;
    let mut budget = eta;
    let max_moves = 10 * p.len();

    for _ in 0..max_moves {
        if budget <= f64::EPSILON * eta {
            break;
        }
        let idx = rng.gen_range(0..mass.len());
        let (&src, &avail) = mass.iter().nth(idx).expect("index within map");
        let magnitude = rng.gen_range(1..=max_shift);
        let dst = if rng.gen_bool(0.5) { src + magnitude } else { src.saturating_sub(magnitude).max(1) };
        let shift = src.abs_diff(dst);
        if shift == 0 {
            continue;
        }
        let cap = avail.min(budget / shift as f64);
        let delta = cap * (1.0 - rng.gen::<f64>());
        if delta <= 0.0 {
            continue;
        }
        budget -= delta * shift as f64;
        let remaining = avail - delta;
        if remaining > 0.0 {
            mass.insert(src, remaining);
        } else {
            mass.remove(&src);
        }
        *mass.entry(dst).or_insert(0.0) += delta;
    }
    DayDistribution::new(mass)
}

/// Parametric family specification, serialized as `{"family": ..., "params": {...}}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", content = "params", rename_all = "snake_case")]
pub enum FamilySpec {
    Uniform {
        #[serde(default = "one")]
        lo: u64,
        hi: u64,
    },
    GaussianDiscretized {
        mean: f64,
        stddev: f64,
        #[serde(default = "one")]
        lo: u64,
        hi: u64,
    },
    GeometricTruncated {
        rate: f64,
        #[serde(default = "one")]
        lo: u64,
        hi: u64,
    },
    TwoPoint {
        atoms: [u64; 2],
        weights: [f64; 2],
    },
    OneHot {
        y: u64,
    },
    Custom {
        atoms: Vec<u64>,
        weights: Vec<f64>,
    },
}

fn one() -> u64 {
    1
}

fn check_range(lo: u64, hi: u64) -> Result<()> {
    if lo == 0 {
        return Err(Error::InvalidParams("range must start at day >= 1".into()));
    }
    if lo > hi {
        return Err(Error::EmptySupport);
    }
    Ok(())
}

fn check_weights(weights: &[f64]) -> Result<()> {
    if weights.iter().any(|w| !w.is_finite() || *w < 0.0) {
        return Err(Error::InvalidParams("weights must be finite and nonnegative".into()));
    }
    let sum: f64 = weights.iter().sum();
    if (sum - 1.0).abs() > NORMALIZATION_TOL {
        return Err(Error::InvalidParams(format!("weights sum to {sum}, expected 1")));
    }
    Ok(())
}

/// Instantiates a family.
pub fn make_distribution(family: &FamilySpec) -> Result<DayDistribution> {
    match *family {
        FamilySpec::Uniform { lo, hi } => {
            check_range(lo, hi)?;
            DayDistribution::from_weights((lo..=hi).map(|d| (d, 1.0)))
        }
        FamilySpec::GaussianDiscretized { mean, stddev, lo, hi } => {
            if !mean.is_finite() || !stddev.is_finite() || stddev <= 0.0 {
                return Err(Error::InvalidParams(format!(
                    "gaussian needs finite mean and stddev > 0, got mean {mean}, stddev {stddev}"
                )));
            }
            check_range(lo, hi)?;
            DayDistribution::from_weights((lo..=hi).map(|d| {
                let z = (d as f64 - mean) / stddev;
                (d, (-0.5 * z * z).exp())
            }))
        }
        FamilySpec::GeometricTruncated { rate, lo, hi } => {
            if !(rate > 0.0 && rate < 1.0) {
                return Err(Error::InvalidParams(format!("rate must lie in (0, 1), got {rate}")));
            }
            check_range(lo, hi)?;
            let ln_keep = (1.0 - rate).ln();
            DayDistribution::from_weights((lo..=hi).map(|d| (d, rate * ((d - 1) as f64 * ln_keep).exp())))
        }
        FamilySpec::TwoPoint { atoms, weights } => {
            if atoms[0] == atoms[1] {
                return Err(Error::InvalidParams("two-point atoms must differ".into()));
            }
            check_weights(&weights)?;
            DayDistribution::new(atoms.into_iter().zip(weights))
        }
        FamilySpec::OneHot { y } => {
            if y == 0 {
                return Err(Error::InvalidParams("one-hot day must be >= 1".into()));
            }
            DayDistribution::point(y)
        }
        FamilySpec::Custom { ref atoms, ref weights } => {
            if atoms.len() != weights.len() {
                return Err(Error::InvalidParams("atoms and weights differ in length".into()));
            }
            check_weights(weights)?;
            DayDistribution::new(atoms.iter().copied().zip(weights.iter().copied()))
                .map_err(|e| Error::InvalidParams(e.to_string()))
        }
    }
}

/// Parses either `{"atoms": [[day, prob], ...]}` or a family specification.
pub fn parse_distribution(text: &str) -> Result<DayDistribution> {
    let value: serde_json::Value = serde_json::from_str(text).map_err(|e| Error::InvalidDistribution(e.to_string()))?;
    if value.get("family").is_some() {
        let family: FamilySpec = serde_json::from_value(value).map_err(|e| Error::InvalidParams(e.to_string()))?;
        make_distribution(&family)
    } else {
        serde_json::from_value(value).map_err(|e| Error::InvalidDistribution(e.to_string()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn worked() -> DayDistribution {
        DayDistribution::new([(1, 0.8), (5, 0.2)]).unwrap()
    }

    #[test]
    fn survival_matches_worked_example() {
        let p = worked();
        assert!((p.survival(2) - 0.2).abs() < 1e-15);
        assert_eq!(p.survival(1), 1.0);
        assert_eq!(p.survival(6), 0.0);
        let u = make_distribution(&FamilySpec::Uniform { lo: 1, hi: 4 }).unwrap();
        assert!((u.survival(3) - 0.5).abs() < 1e-15);
    }

    #[test]
    fn expected_opt_cases() {
        assert!((expected_opt(&worked(), 3).unwrap() - 1.4).abs() < 1e-12);
        assert_eq!(expected_opt(&DayDistribution::point(4).unwrap(), 10).unwrap(), 4.0);
        assert_eq!(expected_opt(&DayDistribution::point(40).unwrap(), 10).unwrap(), 10.0);
        assert!(expected_opt(&worked(), 1).is_err());
    }

    #[test]
    fn distances() {
        let a = DayDistribution::point(3).unwrap();
        let b = DayDistribution::point(7).unwrap();
        assert_eq!(wasserstein1(&a, &b), 4.0);
        assert_eq!(wasserstein1(&a, &a), 0.0);
        assert_eq!(total_variation(&a, &b), 1.0);
        let p = DayDistribution::new([(1, 0.5), (3, 0.5)]).unwrap();
        let q = DayDistribution::point(2).unwrap();
        assert!((wasserstein1(&p, &q) - 1.0).abs() < 1e-15);
        let r = DayDistribution::new([(1, 0.6), (5, 0.4)]).unwrap();
        assert!((total_variation(&worked(), &r) - 0.2).abs() < 1e-12);
    }

    #[test]
    fn families() {
        let two = make_distribution(&FamilySpec::TwoPoint { atoms: [30, 120], weights: [0.7, 0.3] }).unwrap();
        assert_eq!(two.atoms(), &[(30, 0.7), (120, 0.3)]);
        let hot = make_distribution(&FamilySpec::OneHot { y: 5 }).unwrap();
        assert_eq!(hot.atoms(), &[(5, 1.0)]);
        let geo = make_distribution(&FamilySpec::GeometricTruncated { rate: 0.05, lo: 1, hi: 600 }).unwrap();
        assert_eq!(geo.max_day(), 600);
        assert!((geo.prob(2) / geo.prob(1) - 0.95).abs() < 1e-12);
    }

    #[test]
    fn rejects_bad_input() {
        assert!(matches!(DayDistribution::new([(1, 0.5)]), Err(Error::NotNormalized { .. })));
        assert!(DayDistribution::new([(1, -0.5), (2, 1.5)]).is_err());
        assert!(DayDistribution::new([(1, f64::NAN)]).is_err());
        assert!(DayDistribution::new([(0, 1.0)]).is_err());
        assert!(DayDistribution::new([(2, 0.5), (2, 0.5)]).is_err());
        assert!(matches!(
            make_distribution(&FamilySpec::GaussianDiscretized { mean: 5.0, stddev: 0.0, lo: 1, hi: 9 }),
            Err(Error::InvalidParams(_))
        ));
        assert!(matches!(
            make_distribution(&FamilySpec::GaussianDiscretized { mean: 1e6, stddev: 1.0, lo: 1, hi: 9 }),
            Err(Error::EmptySupport)
        ));
        assert!(make_distribution(&FamilySpec::GeometricTruncated { rate: 1.0, lo: 1, hi: 9 }).is_err());
        assert!(make_distribution(&FamilySpec::TwoPoint { atoms: [1, 2], weights: [0.5, 0.4] }).is_err());
    }

    #[test]
    fn parses_both_forms() {
        let p = parse_distribution(r#"{"atoms": [[1, 0.8], [5, 0.2]]}"#).unwrap();
        assert_eq!(p, worked());
        let q = parse_distribution(r#"{"family": "uniform", "params": {"lo": 1, "hi": 4}}"#).unwrap();
        assert_eq!(q.len(), 4);
        assert!(parse_distribution(r#"{"atoms": [[1, -1.0], [2, 2.0]]}"#).is_err());
        assert!(parse_distribution(r#"{"family": "gaussian_discretized", "params": {"mean": 3}}"#).is_err());
    }

    #[test]
    fn perturbation_respects_budget() {
        let p = DayDistribution::point(10).unwrap();
        for seed in 0..25 {
            let q = perturb_wasserstein(&p, 2.0, seed).unwrap();
            assert!(wasserstein1(&p, &q) <= 2.0 + 1e-9);
        }
        assert_eq!(perturb_wasserstein(&p, 0.0, 7).unwrap(), p);
        let a = perturb_wasserstein(&worked(), 5.0, 3).unwrap();
        let b = perturb_wasserstein(&worked(), 5.0, 3).unwrap();
        assert_eq!(a, b);
    }
}
