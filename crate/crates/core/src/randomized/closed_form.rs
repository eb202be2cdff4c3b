use serde::{Deserialize, Serialize};

use super::{CostFunction, StoppingDistribution};
use crate::error::{check_buy_cost, check_ratio, Error, Result};

/// Tolerance on `G(b) >= 1`, the condition for any `R`-robust policy to exist.
const FEASIBILITY_TOL: f64 = 1e-12;

/// Robustness envelope `G(x) = (R - 1)((b / (b - 1))^x - 1)`, the largest CDF value a
/// policy tight on every day up to `x` can reach.
pub fn envelope(b: u64, r: f64, x: u64) -> f64 {
    let growth = (1.0 / (b - 1) as f64).ln_1p();
    (r - 1.0) * (x as f64 * growth).exp_m1()
}

pub(crate) fn check_feasible(b: u64, r: f64) -> Result<()> {
    check_buy_cost(b)?;
    check_ratio(r)?;
    if envelope(b, r, b) < 1.0 - FEASIBILITY_TOL {
        return Err(Error::Infeasible { b, r });
    }
    Ok(())
}

/// First day at which the envelope reaches 1, `ceil(ln(R / (R - 1)) / ln(b / (b - 1)))`.
pub fn full_mass_day(b: u64, r: f64) -> Result<u64> {
    check_buy_cost(b)?;
    check_ratio(r)?;
    let x = (r / (r - 1.0)).ln() / (1.0 / (b - 1) as f64).ln_1p();
    Ok(x.ceil().max(1.0) as u64)
}

/// CDF values at days `1..=last` turned into a pmf, with `F(last)` forced to 1.
fn pmf_from_cdf(cdf: impl IntoIterator<Item = f64>) -> Vec<(u64, f64)> {
    let mut prev = 0.0;
    let mut pmf = Vec::new();
    for (x, f) in (1..).zip(cdf) {
        let f: f64 = f.clamp(prev, 1.0);
        if f > prev {
            pmf.push((x, f - prev));
        }
        prev = f;
    }
    if prev < 1.0 {
        if let Some(last) = pmf.last_mut() {
            last.1 += 1.0 - prev;
        }
    }
    pmf
}

/// Optimal policy for a nondecreasing cost: follow the envelope until it reaches 1.
///
/// Fails with [`Error::Infeasible`] when the envelope is still below 1 at day `b`,
/// since then no `R`-robust policy exists.
pub fn geometric_cdf(b: u64, r: f64) -> Result<StoppingDistribution> {
    check_feasible(b, r)?;
    let mut cdf = Vec::new();
    for x in 1..=b {
        let f = envelope(b, r, x).min(1.0);
        cdf.push(if x == b { 1.0 } else { f });
        if f >= 1.0 {
            break;
        }
    }
    StoppingDistribution::new(pmf_from_cdf(cdf))
}

/// Sufficient condition for the envelope policy to stay optimal for a non-monotone cost:
/// `g` nondecreasing on `1..=y`, `g(t) >= g(y + 1 - b)` on a window after `y`, and `y`
/// far enough past `b` for the envelope to fill before the dip.
pub fn extension_condition_check(g: &CostFunction, b: u64, r: f64, y: u64) -> Result<bool> {
    check_buy_cost(b)?;
    check_ratio(r)?;
    if y == 0 {
        return Err(Error::InvalidArgument("y must be >= 1".into()));
    }
    let reach = (b - 1) as f64 + (r / (r - 1.0)).ln() / (1.0 / (b - 1) as f64).ln_1p();
    if (y as f64) < reach {
        return Ok(false);
    }
    let mut prev = f64::NEG_INFINITY;
    for t in 1..=y {
        let v = g.eval(t);
        if v < prev {
            return Ok(false);
        }
        prev = v;
    }
    let floor = g.eval(y + 1 - b);
    let window = g.last_breakpoint().max(4 * b);
    Ok((y + 1..=y + window).all(|t| g.eval(t) >= floor))
}

/// Exact minimizer of the expected cost under a point prediction.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OneHotSolution {
    pub policy: StoppingDistribution,
    /// Mass bought before the predicted day (the cap `p*` on the envelope).
    pub cap: f64,
    pub objective: f64,
}

/// Inverse of the increasing piecewise-linear map `p -> extra * p + sum_{x=1}^{k} min(G(x), p)`
/// on `[0, upper]`. Returns `None` when `target` exceeds the value at `upper`.
fn invert_capped_sum(envelope_values: &[f64], extra: f64, upper: f64, target: f64) -> Option<f64> {
    let eval = |p: f64| extra * p + envelope_values.iter().map(|&gx| gx.min(p)).sum::<f64>();
    if target <= 0.0 {
        return Some(0.0);
    }
    if eval(upper) < target {
        return None;
    }
    // Breakpoints G(1) < G(2) < ...; on [G(k-1), G(k)] the map is linear with slope
    // extra + (number of x with G(x) > p).
    let mut left = 0.0;
    let mut below = 0.0;
    for (k, &gk) in envelope_values.iter().enumerate() {
        let right = gk.min(upper);
        if right > left {
            let slope = extra + (envelope_values.len() - k) as f64;
            let at_left = extra * left + below + (envelope_values.len() - k) as f64 * left;
            let at_right = at_left + slope * (right - left);
            if at_right >= target {
                return Some((left + (target - at_left) / slope).clamp(left, right));
            }
            left = right;
        }
        if gk >= upper {
            return Some(upper);
        }
        below += gk;
    }
    if extra > 0.0 {
        let at_left = extra * left + below;
        return Some((left + (target - at_left) / extra).clamp(left, upper));
    }
    Some(left)
}

fn snap_to_one(p: f64) -> f64 {
    if p > 1.0 - FEASIBILITY_TOL {
        1.0
    } else {
        p
    }
}

/// Exact optimal `R`-robust policy when the prediction is a point mass on day `y`.
pub fn onehot_exact(b: u64, r: f64, y: u64) -> Result<OneHotSolution> {
    check_feasible(b, r)?;
    if y == 0 {
        return Err(Error::InvalidArgument("y must be >= 1".into()));
    }
    let (bf, yf, slack_rate) = (b as f64, y as f64, r - 1.0);
    let infeasible = || Error::Infeasible { b, r };

    if y < b {
        let g: Vec<f64> = (1..=y).map(|x| envelope(b, r, x)).collect();
        // Growth from day y+1 to day b of a policy tight from y+1 on.
        let lift = (((b - y - 1) as f64) * (1.0 / (bf - 1.0)).ln_1p()).exp();
        let needed = (1.0 - slack_rate * (lift - 1.0)) * (bf - 1.0) / lift - slack_rate * (yf + 1.0);
        let cap = snap_to_one(invert_capped_sum(&g, 0.0, 1.0, needed).ok_or_else(infeasible)?);
        let capped_sum: f64 = g.iter().map(|&gx| gx.min(cap)).sum();
        let base = (slack_rate * (yf + 1.0) + capped_sum) / (bf - 1.0);
        let cdf = (1..=b).map(|x| {
            if x <= y {
                g[(x - 1) as usize].min(cap)
            } else if x == b {
                1.0
            } else {
                let lift = (((x - y - 1) as f64) * (1.0 / (bf - 1.0)).ln_1p()).exp();
                (lift * base + slack_rate * (lift - 1.0)).min(1.0)
            }
        });
        let policy = StoppingDistribution::new(pmf_from_cdf(cdf))?;
        return Ok(OneHotSolution { policy, cap, objective: yf + bf * cap - capped_sum });
    }

    let g: Vec<f64> = (1..=b).map(|x| envelope(b, r, x)).collect();
    let extra = (y - b) as f64;
    let phi = |p: f64| extra * p + g.iter().map(|&gx| gx.min(p)).sum::<f64>();
    let cheap_day = (y - b + 1).min(b);
    let cheap_cap = envelope(b, r, cheap_day).min(1.0);
    let moment_floor = (yf - slack_rate * bf).max(0.0);
    let target = moment_floor.max(phi(cheap_cap));
    let cap = snap_to_one(invert_capped_sum(&g, extra, 1.0, target).ok_or_else(infeasible)?);
    let cdf = (1..=y + 1).map(|x| {
        if x <= b {
            g[(x - 1) as usize].min(cap)
        } else if x <= y {
            cap
        } else {
            1.0
        }
    });
    let policy = StoppingDistribution::new(pmf_from_cdf(cdf))?;
    Ok(OneHotSolution { policy, cap, objective: yf + bf * cap - phi(cap) })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::randomized::check_robustness;

    #[test]
    fn two_two_buys_on_day_one() {
        let f = geometric_cdf(2, 2.0).unwrap();
        assert_eq!(f.pmf(), &[(1, 1.0)]);
    }

    #[test]
    fn full_mass_day_at_fifty() {
        assert_eq!(full_mass_day(50, 1.7).unwrap(), 44);
        assert_eq!(geometric_cdf(50, 1.7).unwrap().max_day(), 44);
    }

    #[test]
    fn small_ratio_is_infeasible() {
        assert_eq!(geometric_cdf(50, 1.3), Err(Error::Infeasible { b: 50, r: 1.3 }));
        assert!(onehot_exact(8, 1.5, 3).is_err());
    }

    #[test]
    fn long_tail_onehot_is_geometric() {
        let geo = geometric_cdf(10, 2.0).unwrap();
        let sol = onehot_exact(10, 2.0, 40).unwrap();
        assert_eq!(sol.policy.pmf().len(), geo.pmf().len());
        for (a, b) in sol.policy.pmf().iter().zip(geo.pmf()) {
            assert_eq!(a.0, b.0);
            assert!((a.1 - b.1).abs() < 1e-12);
        }
    }

    #[test]
    fn onehot_policies_are_robust() {
        for y in 1..=30 {
            let sol = onehot_exact(10, 2.0, y).unwrap();
            assert!(check_robustness(&sol.policy, 10, 2.0).unwrap().feasible, "y = {y}");
        }
    }
}
