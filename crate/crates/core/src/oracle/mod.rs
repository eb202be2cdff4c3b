//! Independent verifiers: an exhaustive threshold scan and an exact LP for the
//! randomized problem on small instances.

mod simplex;

pub use simplex::{LinearProgram, LpSolution, PivotRule};

use serde::{Deserialize, Serialize};

use crate::deterministic::Threshold;
use crate::distributions::DayDistribution;
use crate::error::{check_buy_cost, check_ratio, Error, Result};
use crate::randomized::{CostFunction, StoppingDistribution};

/// Largest horizon the dense solver accepts.
pub const MAX_HORIZON: u64 = 400;

/// Exhaustive threshold search, evaluating every cost from scratch.
pub fn brute_force_threshold(p: &DayDistribution, b: u64) -> Result<(Threshold, f64)> {
    check_buy_cost(b)?;
    let cost = |t: Threshold| -> f64 {
        p.atoms()
            .iter()
            .map(|&(d, q)| {
                let paid = match t {
                    Threshold::Day(t) if t <= d => (b + t - 1) as f64,
                    _ => d as f64,
                };
                q * paid
            })
            .sum()
    };
    let mut best = (Threshold::Day(1), f64::INFINITY);
    for t in 1..=p.max_day() + 1 {
        let v = cost(Threshold::Day(t));
        if v < best.1 {
            best = (Threshold::Day(t), v);
        }
    }
    let never = cost(Threshold::Never);
    if never < best.1 {
        best = (Threshold::Never, never);
    }
    Ok(best)
}

/// Truncated robust-policy LP: minimize `sum g(t) f(t)` over buy days `1..=horizon`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LpInstance {
    pub objective: Vec<f64>,
    pub b: u64,
    #[serde(rename = "R")]
    pub r: f64,
    pub horizon: u64,
}

impl LpInstance {
    /// Horizon `max(last breakpoint + 1, ceil((R - 1) b) + 2, 4b)`; beyond it `g` is flat
    /// and later days only cost more moment.
    pub fn from_cost(g: &CostFunction, b: u64, r: f64) -> Result<Self> {
        check_buy_cost(b)?;
        check_ratio(r)?;
        let horizon = (g.last_breakpoint() + 1).max(((r - 1.0) * b as f64).ceil() as u64 + 2).max(4 * b);
        Ok(Self { objective: (1..=horizon).map(|t| g.eval(t)).collect(), b, r, horizon })
    }
}

/// Solves the instance exactly with the default pivot rule.
pub fn lp_solve(inst: &LpInstance) -> Result<(StoppingDistribution, f64)> {
    lp_solve_with(inst, PivotRule::Bland)
}

pub fn lp_solve_with(inst: &LpInstance, rule: PivotRule) -> Result<(StoppingDistribution, f64)> {
    check_buy_cost(inst.b)?;
    check_ratio(inst.r)?;
    if inst.horizon > MAX_HORIZON {
        return Err(Error::ScaleExceeded { horizon: inst.horizon, limit: MAX_HORIZON });
    }
    if inst.horizon < inst.b || inst.objective.len() as u64 != inst.horizon {
        return Err(Error::InvalidArgument("objective must cover days 1..=horizon, horizon >= b".into()));
    }
    let n = inst.horizon as usize;
    let (b, rate) = (inst.b, inst.r - 1.0);
    // Day x constraint: sum_{t <= x} (t - 1 + b - x) f(t) <= (R - 1) x.
    let mut ub_rows: Vec<Vec<f64>> = (1..b)
        .map(|x| (1..=inst.horizon).map(|t| if t <= x { (t - 1 + b - x) as f64 } else { 0.0 }).collect())
        .collect();
    let mut ub_rhs: Vec<f64> = (1..b).map(|x| rate * x as f64).collect();
    ub_rows.push((1..=inst.horizon).map(|t| (t - 1) as f64).collect());
    ub_rhs.push(rate * b as f64);
    let lp =
        LinearProgram { cost: inst.objective.clone(), ub_rows, ub_rhs, eq_rows: vec![vec![1.0; n]], eq_rhs: vec![1.0] };
    let sol = lp.solve(rule).map_err(|e| match e {
        Error::Lp("infeasible") => Error::Infeasible { b, r: inst.r },
        other => other,
    })?;
    let pmf: Vec<(u64, f64)> = (1..).zip(sol.x).filter(|&(_, m)| m > 1e-15).collect();
    Ok((StoppingDistribution::new(pmf)?, sol.value))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::randomized::build_cost_function;

    #[test]
    fn worked_example() {
        let p = DayDistribution::new([(1, 0.8), (5, 0.2)]).unwrap();
        let (t, v) = brute_force_threshold(&p, 3).unwrap();
        assert_eq!(t, Threshold::Day(2));
        assert!((v - 1.6).abs() < 1e-12);
    }

    #[test]
    fn large_ratio_admits_immediate_purchase() {
        let p = DayDistribution::new([(2, 0.5), (9, 0.5)]).unwrap();
        let g = build_cost_function(&p, 4).unwrap();
        let inst = LpInstance::from_cost(&g, 4, 4.0).unwrap();
        let (_, value) = lp_solve(&inst).unwrap();
        assert!(value <= g.eval(1) + 1e-9);
    }

    #[test]
    fn horizon_limit() {
        let g = build_cost_function(&DayDistribution::point(500).unwrap(), 4).unwrap();
        let inst = LpInstance::from_cost(&g, 4, 2.0).unwrap();
        assert!(matches!(lp_solve(&inst), Err(Error::ScaleExceeded { .. })));
    }
}
