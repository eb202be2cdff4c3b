use std::fmt::Write as _;
use std::path::Path;

use anyhow::anyhow;
use log::info;
use skirent_core::deterministic::{expected_cost_threshold, optimal_threshold};
use skirent_core::distributions::DayDistribution;
use skirent_core::oracle::{brute_force_threshold, lp_solve, LpInstance};
use skirent_core::randomized::{
    build_cost_function, check_robustness, default_epsilon, expected_policy_cost, geometric_cdf, onehot_exact,
    water_fill, CostFunction, Segment,
};
use skirent_core::Error;

use crate::commands::{describe_constraint, emit, read_policy};
use crate::config::Settings;
use crate::{Failure, Outcome, UsageContext};

const REL_TOL: f64 = 1e-7;
const GRID_MAX_B: u64 = 12;
const GRID_RATIOS: [f64; 3] = [1.6, 2.0, 3.0];

#[derive(Debug)]
struct Tally {
    name: &'static str,
    passed: usize,
    failures: Vec<String>,
}

impl Tally {
    fn new(name: &'static str) -> Self {
        Self { name, passed: 0, failures: Vec::new() }
    }

    fn record(&mut self, ok: bool, context: impl FnOnce() -> String) {
        if ok {
            self.passed += 1;
        } else {
            self.failures.push(context());
        }
    }

    fn line(&self) -> String {
        let total = self.passed + self.failures.len();
        match self.failures.first() {
            None => format!("PASS {} {}/{}", self.name, self.passed, total),
            Some(first) => format!("FAIL {} {}/{} (first: {})", self.name, self.passed, total, first),
        }
    }
}

fn close(a: f64, b: f64) -> bool {
    (a - b).abs() <= REL_TOL * a.abs().max(b.abs()).max(1.0)
}

pub fn run(settings: &Settings, onehot_only: bool, policy: Option<&Path>) -> Outcome {
    if let Some(path) = policy {
        return verify_policy(settings, path);
    }
    let bs: Vec<u64> = if settings.has_b() { vec![settings.b().usage()?] } else { (2..=GRID_MAX_B).collect() };
    let rs: Vec<f64> = match settings.r_opt().usage()? {
        Some(r) => vec![r],
        None => GRID_RATIOS.to_vec(),
    };

    let mut tallies = vec![onehot_check(&bs, &rs)?];
    if !onehot_only {
        tallies.push(threshold_check(&bs)?);
        tallies.push(geometric_check(&bs, &rs)?);
        tallies.push(water_fill_check(&bs, &rs)?);
    }

    let mut text = String::new();
    for t in &tallies {
        let _ = writeln!(text, "{}", t.line());
    }
    let failed = tallies.iter().filter(|t| !t.failures.is_empty()).count();
    let _ = writeln!(text, "{} of {} checks passed", tallies.len() - failed, tallies.len());
    emit(settings, &text)?;
    if failed > 0 {
        return Err(Failure::Compute(anyhow!("{failed} verification check(s) failed")));
    }
    Ok(())
}

fn verify_policy(settings: &Settings, path: &Path) -> Outcome {
    let record = read_policy(path)?;
    let b = if settings.has_b() { settings.b().usage()? } else { record.b };
    let r = settings.r_opt().usage()?.unwrap_or(record.r);
    let f = record.policy().usage()?;
    let report = check_robustness(&f, b, r)?;
    let verdict = if report.feasible { "PASS" } else { "FAIL" };
    let text = format!(
        "{verdict} robustness b={b} R={r} min_slack={:.3e} violated_constraint={}\n",
        report.min_slack(),
        describe_constraint(report.first_violation())
    );
    emit(settings, &text)?;
    if !report.feasible {
        return Err(Failure::Compute(anyhow!(
            "policy violates constraint {}",
            describe_constraint(report.first_violation())
        )));
    }
    Ok(())
}

fn onehot_check(bs: &[u64], rs: &[f64]) -> Outcome<Tally> {
    let mut tally = Tally::new("onehot-vs-lp");
    for &b in bs {
        for &r in rs {
            for y in 1..=3 * b {
                let g = build_cost_function(&DayDistribution::point(y)?, b)?;
                let lp = lp_solve(&LpInstance::from_cost(&g, b, r)?);
                let exact = onehot_exact(b, r, y);
                let ok = match (&exact, &lp) {
                    (Ok(sol), Ok((_, value))) => {
                        close(sol.objective, *value)
                            && close(expected_policy_cost(&sol.policy, &g), *value)
                            && check_robustness(&sol.policy, b, r)?.feasible
                    }
                    (Err(Error::Infeasible { .. }), Err(Error::Infeasible { .. })) => true,
                    _ => false,
                };
                tally.record(ok, || {
                    format!("b={b} R={r} y={y}: {:?} vs {:?}", exact.map(|s| s.objective), lp.map(|l| l.1))
                });
            }
        }
    }
    info!("{}", tally.line());
    Ok(tally)
}

/// Point, uniform and two-point predictions over days `1..=3b`.
fn grid_distributions(b: u64) -> Outcome<Vec<DayDistribution>> {
    let top = 3 * b;
    let mut out = Vec::new();
    for y in 1..=top {
        out.push(DayDistribution::point(y)?);
        out.push(DayDistribution::from_weights((1..=y).map(|d| (d, 1.0)))?);
        if y < top {
            out.push(DayDistribution::new([(y, 0.5), (top, 0.5)])?);
        }
    }
    Ok(out)
}

fn threshold_check(bs: &[u64]) -> Outcome<Tally> {
    let mut tally = Tally::new("threshold-scan-vs-brute-force");
    for &b in bs {
        for p in grid_distributions(b)? {
            let (t_fast, v_fast) = optimal_threshold(&p, b)?;
            let (t_slow, v_slow) = brute_force_threshold(&p, b)?;
            let ok = close(v_fast, v_slow) && close(expected_cost_threshold(&p, b, t_slow)?, v_fast);
            tally.record(ok, || format!("b={b}: {t_fast:?}/{v_fast} vs {t_slow:?}/{v_slow}"));
        }
    }
    info!("{}", tally.line());
    Ok(tally)
}

/// Increasing costs: one linear piece, and a concave two-piece cost.
fn increasing_costs(b: u64) -> Outcome<Vec<CostFunction>> {
    let bf = b as f64;
    let linear = CostFunction::new(vec![
        Segment { lo: 0, hi: 2 * b, slope: 1.0, intercept: bf - 1.0 },
        Segment { lo: 2 * b, hi: u64::MAX, slope: 0.0, intercept: 4.0 * bf },
    ])?;
    let concave = CostFunction::new(vec![
        Segment { lo: 0, hi: b, slope: 1.0, intercept: bf - 1.0 },
        Segment { lo: b, hi: 3 * b, slope: 0.25, intercept: 1.75 * bf - 1.0 },
        Segment { lo: 3 * b, hi: u64::MAX, slope: 0.0, intercept: 3.0 * bf },
    ])?;
    Ok(vec![linear, concave])
}

fn geometric_check(bs: &[u64], rs: &[f64]) -> Outcome<Tally> {
    let mut tally = Tally::new("geometric-vs-lp");
    for &b in bs {
        for &r in rs {
            for g in increasing_costs(b)? {
                let lp = lp_solve(&LpInstance::from_cost(&g, b, r)?);
                let closed = geometric_cdf(b, r);
                let ok = match (&closed, &lp) {
                    (Ok(f), Ok((_, value))) => close(expected_policy_cost(f, &g), *value),
                    (Err(Error::Infeasible { .. }), Err(Error::Infeasible { .. })) => true,
                    _ => false,
                };
                tally.record(ok, || {
                    format!("b={b} R={r}: {:?} vs {:?}", closed.map(|f| expected_policy_cost(&f, &g)), lp.map(|l| l.1))
                });
            }
        }
    }
    info!("{}", tally.line());
    Ok(tally)
}

/// Water-filling is robust, never beats the LP optimum, and its level never exceeds
/// the highest cost the LP optimum pays.
fn water_fill_check(bs: &[u64], rs: &[f64]) -> Outcome<Tally> {
    let mut tally = Tally::new("water-fill-vs-lp");
    for &b in bs {
        for &r in rs {
            for p in grid_distributions(b)?.into_iter().step_by(4) {
                let g = build_cost_function(&p, b)?;
                let eps = default_epsilon(&g);
                let lp = lp_solve(&LpInstance::from_cost(&g, b, r)?);
                let wf = water_fill(&g, b, r, eps);
                let ok = match (&wf, &lp) {
                    (Ok(wf), Ok((f, value))) => {
                        let top = f.pmf().iter().filter(|a| a.1 > 1e-9).map(|a| g.eval(a.0)).fold(0.0, f64::max);
                        check_robustness(&wf.policy, b, r)?.feasible
                            && check_robustness(f, b, r)?.feasible
                            && wf.objective >= value - REL_TOL * value.max(1.0)
                            && wf.level <= top + 2.0 * eps
                    }
                    (Err(Error::Infeasible { .. }), Err(Error::Infeasible { .. })) => true,
                    _ => false,
                };
                tally.record(ok, || {
                    format!("b={b} R={r} p={:?}: {:?} vs {:?}", p.atoms(), wf.map(|w| w.objective), lp.map(|l| l.1))
                });
            }
        }
    }
    info!("{}", tally.line());
    Ok(tally)
}
