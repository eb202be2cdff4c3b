use std::fs;
use std::io::Write;
use std::path::Path;

use anyhow::{anyhow, Context};
use log::info;
use serde::{Deserialize, Serialize};
use skirent_core::baselines::{baseline_policy, BaselineKind};
use skirent_core::deterministic::{
    clamp_range, clamp_threshold, expected_cost_threshold, optimal_threshold, robust_consistent_bound, BoundReport,
    Metric, Threshold,
};
use skirent_core::distributions::{parse_distribution, total_variation, wasserstein1, DayDistribution};
use skirent_core::evaluation::{
    consistency, default_eta_grid, run_consistency_table, run_perturbation_sweep, ExperimentResult,
};
use skirent_core::randomized::{
    build_cost_function, check_robustness, default_epsilon, expected_policy_cost, realized_worst_ratio, water_fill,
    PolicyRecord, StoppingDistribution,
};

use crate::config::{read_inline_or_file, Settings};
use crate::{BaselineArg, ExperimentKind, Failure, Format, MetricArg, Outcome, UsageContext};

pub const DEFAULT_B: u64 = 50;
pub const DEFAULT_R: f64 = 1.7;
pub const DEFAULT_TRIALS: u32 = 25;

pub fn emit(settings: &Settings, text: &str) -> Outcome {
    match &settings.output {
        Some(path) => {
            fs::write(path, text).with_context(|| format!("writing {}", path.display()))?;
            info!("wrote {}", path.display());
        }
        None => {
            let mut out = std::io::stdout().lock();
            out.write_all(text.as_bytes()).context("writing to stdout")?;
        }
    }
    Ok(())
}

fn emit_json<T: Serialize>(settings: &Settings, value: &T) -> Outcome {
    let mut text = serde_json::to_string_pretty(value).context("serializing output")?;
    text.push('\n');
    emit(settings, &text)
}

fn metric(arg: MetricArg) -> Metric {
    match arg {
        MetricArg::Wasserstein => Metric::Wasserstein,
        MetricArg::Tv => Metric::Tv,
    }
}

fn check_eta(eta: f64) -> Outcome {
    if !(eta.is_finite() && eta >= 0.0) {
        return Err(Failure::Usage(anyhow!("--eta must be finite and >= 0, got {eta}")));
    }
    Ok(())
}

#[derive(Debug, Serialize, Deserialize)]
pub struct ThresholdOutput {
    pub b: u64,
    pub t_star: Threshold,
    pub cost: f64,
    pub expected_opt: f64,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub clamped: Option<Threshold>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub clamped_cost: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub bound: Option<BoundReport>,
}

pub fn threshold(settings: &Settings, eta: f64, metric_arg: MetricArg) -> Outcome {
    check_eta(eta)?;
    let b = settings.b().usage()?;
    let p = settings.distribution().usage()?;
    let lambda = settings.lambda().usage()?;
    let (t_star, cost) = optimal_threshold(&p, b)?;
    info!("optimal threshold {t_star:?} with expected cost {cost}");
    let mut out = ThresholdOutput {
        b,
        t_star,
        cost,
        expected_opt: p.expected_opt(b),
        clamped: None,
        clamped_cost: None,
        bound: None,
    };
    if let Some(lambda) = lambda {
        let clamped = clamp_threshold(t_star, b, lambda)?;
        out.clamped = Some(clamped);
        out.clamped_cost = Some(expected_cost_threshold(&p, b, clamped)?);
        out.bound = Some(robust_consistent_bound(&p, b, lambda, eta, metric(metric_arg))?);
    }
    emit_json(settings, &out)
}

#[derive(Debug, Serialize, Deserialize)]
pub struct ClampOutput {
    pub b: u64,
    pub lambda: f64,
    pub range: (u64, u64),
    pub cost: f64,
    pub report: BoundReport,
}

pub fn clamp(settings: &Settings, eta: f64, metric_arg: MetricArg) -> Outcome {
    check_eta(eta)?;
    let b = settings.b().usage()?;
    let p = settings.distribution().usage()?;
    let lambda = settings.lambda().usage()?.ok_or_else(|| Failure::Usage(anyhow!("missing --lambda")))?;
    let report = robust_consistent_bound(&p, b, lambda, eta, metric(metric_arg))?;
    let out = ClampOutput {
        b,
        lambda,
        range: clamp_range(b, lambda)?,
        cost: expected_cost_threshold(&p, b, report.clamped_threshold)?,
        report,
    };
    emit_json(settings, &out)
}

/// A policy together with its robustness check and its score under the prediction.
#[derive(Debug, Serialize, Deserialize)]
pub struct PolicyReport {
    pub policy: PolicyRecord,
    pub consistency: f64,
    pub robust: bool,
    pub min_slack: f64,
    /// Violated constraint: a day `x < b`, or 0 for the tail-moment constraint.
    pub violated_constraint: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub level: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub checks: Option<u32>,
}

fn policy_report(
    p: &DayDistribution,
    f: &StoppingDistribution,
    b: u64,
    r: f64,
    objective: f64,
) -> Outcome<PolicyReport> {
    let robustness = check_robustness(f, b, r)?;
    Ok(PolicyReport {
        policy: PolicyRecord::new(f, b, r, objective),
        consistency: consistency(p, f, b)?,
        robust: robustness.feasible,
        min_slack: robustness.min_slack(),
        violated_constraint: robustness.first_violation(),
        level: None,
        checks: None,
    })
}

fn finish_policy(settings: &Settings, report: &PolicyReport) -> Outcome {
    emit_json(settings, report)?;
    if !report.robust {
        return Err(Failure::Compute(anyhow!(
            "policy is not robust; violated constraint {}",
            describe_constraint(report.violated_constraint)
        )));
    }
    Ok(())
}

pub fn describe_constraint(index: Option<u64>) -> String {
    match index {
        Some(0) => "tail".into(),
        Some(x) => format!("x = {x}"),
        None => "none".into(),
    }
}

pub fn waterfill(settings: &Settings) -> Outcome {
    let b = settings.b().usage()?;
    let r = settings.r().usage()?;
    let p = settings.distribution().usage()?;
    let g = build_cost_function(&p, b)?;
    let epsilon = settings.epsilon().usage()?.unwrap_or_else(|| default_epsilon(&g));
    let wf = water_fill(&g, b, r, epsilon)?;
    info!("water level {} after {} checks", wf.level, wf.checks);
    let mut report = policy_report(&p, &wf.policy, b, r, wf.objective)?;
    report.level = Some(wf.level);
    report.checks = Some(wf.checks);
    finish_policy(settings, &report)
}

pub fn baseline(settings: &Settings, kind: BaselineArg) -> Outcome {
    let b = settings.b().usage()?;
    let r = settings.r().usage()?;
    let p = settings.distribution().usage()?;
    let kind = match kind {
        BaselineArg::Majority => BaselineKind::MajorityBranch,
        BaselineArg::Mixture => BaselineKind::Mixture,
    };
    let f = baseline_policy(&p, b, r, kind)?;
    let g = build_cost_function(&p, b)?;
    let objective = expected_policy_cost(&f, &g);
    let report = policy_report(&p, &f, b, r, objective)?;
    finish_policy(settings, &report)
}

pub fn experiment(settings: &Settings, which: ExperimentKind) -> Outcome {
    let b = settings.b_or(DEFAULT_B).usage()?;
    let r = settings.r_or(DEFAULT_R).usage()?;
    let epsilon = settings.epsilon().usage()?;
    let result: ExperimentResult = match which {
        ExperimentKind::Table => run_consistency_table(b, r, epsilon)?,
        ExperimentKind::Sweep => {
            let etas = settings.etas.clone().unwrap_or_else(default_eta_grid);
            let trials = settings.trials.unwrap_or(DEFAULT_TRIALS);
            if trials == 0 {
                return Err(Failure::Usage(anyhow!("--trials must be at least 1")));
            }
            if let Some(bad) = etas.iter().find(|e| !(e.is_finite() && **e >= 0.0)) {
                return Err(Failure::Usage(anyhow!("--etas values must be finite and >= 0, got {bad}")));
            }
            run_perturbation_sweep(b, r, &etas, trials, settings.seed(), epsilon)?
        }
    };
    for m in result.means() {
        info!("{} {} eta={} mean consistency {:.4}", m.family, m.policy, m.eta, m.mean_consistency);
    }
    let text = match settings.format {
        Format::Csv => result.to_csv(),
        Format::Json => result.to_json() + "\n",
    };
    emit(settings, &text)
}

/// Reads a policy file: either a bare policy record or a full policy report.
pub fn read_policy(path: &Path) -> Outcome<PolicyRecord> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display())).usage()?;
    if let Ok(report) = serde_json::from_str::<PolicyReport>(&text) {
        return Ok(report.policy);
    }
    serde_json::from_str::<PolicyRecord>(&text).with_context(|| format!("parsing policy {}", path.display())).usage()
}

#[derive(Debug, Default, Serialize, Deserialize)]
pub struct MetricsOutput {
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub mean: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub wasserstein: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub total_variation: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub expected_opt: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub consistency: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub worst_ratio: Option<f64>,
}

pub fn metrics(settings: &Settings, truth: Option<&str>, policy: Option<&Path>) -> Outcome {
    let p = settings.distribution_opt().usage()?;
    let q = truth
        .map(|arg| -> anyhow::Result<DayDistribution> { Ok(parse_distribution(&read_inline_or_file(arg)?)?) })
        .transpose()
        .usage()?;
    let record = policy.map(read_policy).transpose()?;
    let b = match (settings.has_b(), &record) {
        (true, _) => Some(settings.b().usage()?),
        (false, Some(rec)) => Some(rec.b),
        (false, None) => None,
    };
    let mut out = MetricsOutput::default();
    if let Some(p) = &p {
        out.mean = Some(p.mean());
        if let Some(q) = &q {
            out.wasserstein = Some(wasserstein1(p, q));
            out.total_variation = Some(total_variation(p, q));
        }
        if let Some(b) = b {
            out.expected_opt = Some(p.expected_opt(b));
        }
    } else if q.is_some() {
        return Err(Failure::Usage(anyhow!("--truth needs --dist to compare against")));
    }
    if let Some(rec) = &record {
        let f = rec.policy().usage()?;
        let b = b.unwrap_or(rec.b);
        if let Some(p) = &p {
            out.consistency = Some(consistency(p, &f, b)?);
        }
        out.worst_ratio = Some(realized_worst_ratio(&f, b, f.max_day().max(b) + b)?);
    }
    if p.is_none() && record.is_none() {
        return Err(Failure::Usage(anyhow!("metrics needs --dist or --policy")));
    }
    emit_json(settings, &out)
}
