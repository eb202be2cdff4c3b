//! Consistency metric and the two experiments: the fixed-family consistency table
//! and the perturbation sweep.

use std::fmt::Write as _;

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::baselines::{baseline_policy, BaselineKind};
use crate::deterministic::{clamp_threshold, expected_cost_threshold, Threshold};
use crate::distributions::{make_distribution, perturb_wasserstein, DayDistribution, FamilySpec};
use crate::error::{Error, Result};
use crate::randomized::{build_cost_function, default_epsilon, expected_policy_cost, water_fill, StoppingDistribution};

/// `E[g_p(Z)] / min_t g_p(t)`, with `g_p` built from the true distribution `p`.
pub fn consistency(p: &DayDistribution, f: &StoppingDistribution, b: u64) -> Result<f64> {
    let g = build_cost_function(p, b)?;
    Ok(expected_policy_cost(f, &g) / g.min_value())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultRow {
    pub family: String,
    pub policy: String,
    pub eta: f64,
    pub trial: u32,
    pub consistency: f64,
    pub objective: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Metadata {
    pub experiment: String,
    pub b: u64,
    #[serde(rename = "R")]
    pub r: f64,
    /// Absolute binary-search tolerance; `None` means `1e-7 * max g` per instance.
    pub epsilon: Option<f64>,
    pub n_trials: u32,
    pub seed: Option<u64>,
    pub eta_grid: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentResult {
    pub metadata: Metadata,
    pub rows: Vec<ResultRow>,
}

/// Mean consistency of one policy on one family at one error level.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MeanRow {
    pub family: String,
    pub policy: String,
    pub eta: f64,
    pub mean_consistency: f64,
}

/// Formats with six significant digits.
fn sig6(x: f64) -> String {
    if x == 0.0 || !x.is_finite() {
        return format!("{x}");
    }
    let magnitude = x.abs().log10().floor() as i32;
    if !(-4..6).contains(&magnitude) {
        return format!("{x:.5e}");
    }
    let decimals = (5 - magnitude).max(0) as usize;
    format!("{x:.decimals$}")
}

impl ExperimentResult {
    fn new(metadata: Metadata, mut rows: Vec<ResultRow>) -> Self {
        rows.sort_by(|a, b| {
            (&a.family, &a.policy)
                .cmp(&(&b.family, &b.policy))
                .then(a.eta.total_cmp(&b.eta))
                .then(a.trial.cmp(&b.trial))
        });
        Self { metadata, rows }
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("family,policy,eta,trial,consistency,objective\n");
        for r in &self.rows {
            let _ = writeln!(
                out,
                "{},{},{},{},{},{}",
                r.family,
                r.policy,
                sig6(r.eta),
                r.trial,
                sig6(r.consistency),
                sig6(r.objective)
            );
        }
        out
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("experiment results serialize")
    }

    /// Mean consistency per `(family, policy, eta)`, in row order.
    pub fn means(&self) -> Vec<MeanRow> {
        let mut out: Vec<(MeanRow, usize)> = Vec::new();
        for r in &self.rows {
            match out.last_mut() {
                Some((m, n)) if m.family == r.family && m.policy == r.policy && m.eta == r.eta => {
                    m.mean_consistency += r.consistency;
                    *n += 1;
                }
                _ => out.push((
                    MeanRow {
                        family: r.family.clone(),
                        policy: r.policy.clone(),
                        eta: r.eta,
                        mean_consistency: r.consistency,
                    },
                    1,
                )),
            }
        }
        out.into_iter()
            .map(|(mut m, n)| {
                m.mean_consistency /= n as f64;
                m
            })
            .collect()
    }

    pub fn mean(&self, family: &str, policy: &str, eta: f64) -> Option<f64> {
        self.means()
            .into_iter()
            .find(|m| m.family == family && m.policy == policy && m.eta == eta)
            .map(|m| m.mean_consistency)
    }
}

pub const POLICY_OURS: &str = "ours";
pub const POLICY_MAJORITY: &str = "majority";
pub const POLICY_MIXTURE: &str = "mixture";

/// The five families of the consistency table, with their labels.
pub fn table_families() -> Vec<(&'static str, FamilySpec)> {
    vec![
        ("unif100", FamilySpec::Uniform { lo: 1, hi: 100 }),
        ("unif200", FamilySpec::Uniform { lo: 1, hi: 200 }),
        ("gauss", FamilySpec::GaussianDiscretized { mean: 50.0, stddev: 12.0, lo: 1, hi: 150 }),
        ("geom", FamilySpec::GeometricTruncated { rate: 0.05, lo: 1, hi: 600 }),
        ("twopoint", FamilySpec::TwoPoint { atoms: [30, 120], weights: [0.7, 0.3] }),
    ]
}

/// Policies built from `p_hat` and scored under `p`.
fn score_policies(
    p: &DayDistribution,
    p_hat: &DayDistribution,
    b: u64,
    r: f64,
    epsilon: Option<f64>,
) -> Result<Vec<(&'static str, f64, f64)>> {
    let g_hat = build_cost_function(p_hat, b)?;
    let eps = epsilon.unwrap_or_else(|| default_epsilon(&g_hat));
    let ours = water_fill(&g_hat, b, r, eps)?.policy;
    let majority = baseline_policy(p_hat, b, r, BaselineKind::MajorityBranch)?;
    let mixture = baseline_policy(p_hat, b, r, BaselineKind::Mixture)?;
    let g = build_cost_function(p, b)?;
    let best = g.min_value();
    Ok([(POLICY_OURS, ours), (POLICY_MAJORITY, majority), (POLICY_MIXTURE, mixture)]
        .into_iter()
        .map(|(label, f)| {
            let objective = expected_policy_cost(&f, &g);
            (label, objective / best, objective)
        })
        .collect())
}

/// Consistency of the water-filling policy and both baselines on the five table families.
pub fn run_consistency_table(b: u64, r: f64, epsilon: Option<f64>) -> Result<ExperimentResult> {
    let mut rows = Vec::new();
    for (label, family) in table_families() {
        let p = make_distribution(&family)?;
        for (policy, consistency, objective) in score_policies(&p, &p, b, r, epsilon)? {
            rows.push(ResultRow {
                family: label.into(),
                policy: policy.into(),
                eta: 0.0,
                trial: 0,
                consistency,
                objective,
            });
        }
    }
    let metadata = Metadata { experiment: "table".into(), b, r, epsilon, n_trials: 1, seed: None, eta_grid: vec![0.0] };
    Ok(ExperimentResult::new(metadata, rows))
}

pub const SWEEP_FAMILY: &str = "gauss90";

/// Ground truth of the sweep: N(90, 12^2) at integer days, truncated at the first day
/// where the cumulative mass reaches `1 - 1e-9`.
pub fn sweep_truth() -> Result<DayDistribution> {
    let (mean, sd) = (90.0_f64, 12.0_f64);
    let horizon = (mean + 20.0 * sd).ceil() as u64;
    let weight = |d: u64| {
        let z = (d as f64 - mean) / sd;
        (-0.5 * z * z).exp()
    };
    let total: f64 = (1..=horizon).map(weight).sum();
    let mut acc = 0.0;
    let mut last = horizon;
    for d in 1..=horizon {
        acc += weight(d);
        if acc / total >= 1.0 - 1e-9 {
            last = d;
            break;
        }
    }
    make_distribution(&FamilySpec::GaussianDiscretized { mean, stddev: sd, lo: 1, hi: last })
}

/// Default error grid `0, 2, ..., 20`.
pub fn default_eta_grid() -> Vec<f64> {
    (0..=10).map(|i| 2.0 * i as f64).collect()
}

/// Per-trial seed derived from the master seed and the `(eta index, trial)` counter.
pub fn trial_seed(master: u64, eta_index: usize, trial: u32) -> u64 {
    let mut rng = ChaCha8Rng::seed_from_u64(master);
    rng.set_stream(((eta_index as u64) << 32) | trial as u64);
    rng.next_u64()
}

/// Policies computed from Wasserstein perturbations of the truth, scored under the truth.
pub fn run_perturbation_sweep(
    b: u64,
    r: f64,
    eta_grid: &[f64],
    n_trials: u32,
    seed: u64,
    epsilon: Option<f64>,
) -> Result<ExperimentResult> {
    if let Some(&bad) = eta_grid.iter().find(|e| !(e.is_finite() && **e >= 0.0)) {
        return Err(Error::InvalidArgument(format!("eta values must be finite and >= 0, got {bad}")));
    }
    if n_trials == 0 {
        return Err(Error::InvalidArgument("at least one trial is required".into()));
    }
    let p = sweep_truth()?;
    let jobs: Vec<(usize, u32)> = (0..eta_grid.len()).flat_map(|i| (0..n_trials).map(move |t| (i, t))).collect();
    let rows: Vec<Vec<ResultRow>> = jobs
        .par_iter()
        .map(|&(i, trial)| {
            let eta = eta_grid[i];
            let p_hat = perturb_wasserstein(&p, eta, trial_seed(seed, i, trial))?;
            Ok(score_policies(&p, &p_hat, b, r, epsilon)?
                .into_iter()
                .map(|(policy, consistency, objective)| ResultRow {
                    family: SWEEP_FAMILY.into(),
                    policy: policy.into(),
                    eta,
                    trial,
                    consistency,
                    objective,
                })
                .collect())
        })
        .collect::<Result<_>>()?;
    let metadata =
        Metadata { experiment: "sweep".into(), b, r, epsilon, n_trials, seed: Some(seed), eta_grid: eta_grid.to_vec() };
    Ok(ExperimentResult::new(metadata, rows.into_iter().flatten().collect()))
}

/// Outcome of the `lambda = 1/3` example with horizon `2b/3` or `2b` equally likely.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CaseStudy {
    /// Buying after `2b/3` days, inside the clamp range `[b/3, 3b]`.
    pub clamp_threshold: Threshold,
    pub clamp_cost: f64,
    /// Buying after `b/3` days, the short branch of the point-prediction rule.
    pub comparator_threshold: Threshold,
    pub comparator_cost: f64,
}

pub fn case_study_lambda_third(b: u64) -> Result<CaseStudy> {
    if b < 6 || !b.is_multiple_of(6) {
        return Err(Error::InvalidArgument(format!("b must be a positive multiple of 6, got {b}")));
    }
    let p = DayDistribution::new([(2 * b / 3, 0.5), (2 * b, 0.5)])?;
    let clamp = clamp_threshold(Threshold::Day(2 * b / 3 + 1), b, 1.0 / 3.0)?;
    let comparator = Threshold::Day(b / 3 + 1);
    Ok(CaseStudy {
        clamp_threshold: clamp,
        clamp_cost: expected_cost_threshold(&p, b, clamp)?,
        comparator_threshold: comparator,
        comparator_cost: expected_cost_threshold(&p, b, comparator)?,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn six_significant_digits() {
        assert_eq!(sig6(1.0415123), "1.04151");
        assert_eq!(sig6(52.2), "52.2000");
        assert_eq!(sig6(0.0), "0");
        assert_eq!(sig6(1234567.0), "1.23457e6");
    }

    #[test]
    fn case_study_small() {
        let cs = case_study_lambda_third(6).unwrap();
        assert_eq!((cs.clamp_cost, cs.comparator_cost), (7.0, 8.0));
        assert!(case_study_lambda_third(9).is_err());
    }

    #[test]
    fn point_mass_at_argmin_is_fully_consistent() {
        let p = DayDistribution::new([(1, 0.8), (5, 0.2)]).unwrap();
        let f = StoppingDistribution::point(2).unwrap();
        assert!((consistency(&p, &f, 3).unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn sweep_truth_covers_the_mass() {
        let p = sweep_truth().unwrap();
        assert!(p.max_day() > 150 && p.max_day() < 170);
    }

    #[test]
    fn trial_seeds_differ() {
        assert_ne!(trial_seed(1, 0, 0), trial_seed(1, 0, 1));
        assert_ne!(trial_seed(1, 0, 0), trial_seed(1, 1, 0));
        assert_eq!(trial_seed(1, 3, 4), trial_seed(1, 3, 4));
    }
}
