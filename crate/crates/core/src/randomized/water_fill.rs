//! Water-filling: binary search on a cost level `h`, filling the robustness envelope
//! with mass on days whose cost is at most `h`.

use serde::{Deserialize, Serialize};

use super::closed_form::check_feasible;
use super::{expected_policy_cost, CostFunction, StoppingDistribution};
use crate::error::{Error, Result};

/// CDF values this close to 1 are treated as full.
const FULL: f64 = 1.0 - 1e-12;

/// Result of [`water_fill`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WaterFill {
    pub policy: StoppingDistribution,
    pub objective: f64,
    /// Water level the policy was built at.
    pub level: f64,
    /// Number of feasibility tests run by the binary search.
    pub checks: u32,
    pub level_bounds: (f64, f64),
}

/// Default search tolerance, `1e-7 * max g`.
pub fn default_epsilon(g: &CostFunction) -> f64 {
    1e-7 * g.max_value().abs().max(f64::MIN_POSITIVE)
}

struct Filler<'a> {
    g: &'a CostFunction,
    b: u64,
    slack_rate: f64,
    growth: f64,
}

impl Filler<'_> {
    /// Runs one feasibility test at level `h`. When `pmf` is given, the masses placed are
    /// recorded in it; the outcome does not depend on recording.
    fn fill(&self, h: f64, mut pmf: Option<&mut Vec<(u64, f64)>>) -> bool {
        let (b, rate) = (self.b, self.slack_rate);
        let bf = b as f64;
        let mut cdf = 0.0_f64;
        let mut moment = 0.0_f64;
        let mut tight_at: Option<u64> = None;

        for seg in self.g.segments().iter().take_while(|s| s.lo < b) {
            let start = seg.lo + 1;
            let last = if seg.slope > 0.0 {
                let reach = ((h - seg.intercept) / seg.slope).floor();
                if reach < start as f64 {
                    continue;
                }
                (reach as u64).min(seg.hi).min(b)
            } else if seg.intercept <= h {
                seg.hi.min(b)
            } else {
                continue;
            };

            let slack = rate * start as f64 - (moment + (bf - start as f64) * cdf);
            if slack > 0.0 {
                let atom = (slack / (bf - 1.0)).min(1.0 - cdf);
                if let Some(prev) = tight_at {
                    let gap_form = (rate + cdf) * (start - prev) as f64 / (bf - 1.0);
                    debug_assert!(atom >= 1.0 - cdf || (atom - gap_form).abs() <= 1e-9 * gap_form.max(1.0));
                }
                cdf += atom;
                if let Some(pmf) = pmf.as_deref_mut() {
                    pmf.push((start, atom));
                }
            }
            if cdf >= FULL {
                return true;
            }

            let span = (last - start) as f64;
            let filled = (cdf + rate) * (span * self.growth).exp() - rate;
            if let Some(pmf) = pmf.as_deref_mut() {
                let mut prev = cdf;
                for x in start + 1..=last {
                    let fx = ((cdf + rate) * ((x - start) as f64 * self.growth).exp() - rate).min(1.0);
                    pmf.push((x, fx - prev));
                    prev = fx;
                    if fx >= FULL {
                        break;
                    }
                }
            }
            if filled >= FULL {
                return true;
            }
            cdf = filled;
            moment = rate * last as f64 - (bf - last as f64) * cdf;
            tight_at = Some(last);
        }

        // Remaining mass goes to one day after b: the cheapest admissible segment start.
        let residual = 1.0 - cdf;
        let budget = rate * bf - moment;
        let mut best: Option<(f64, u64)> = None;
        for seg in self.g.segments().iter().filter(|s| s.hi > b) {
            let day = (seg.lo + 1).max(b + 1);
            let cost = seg.eval(day);
            if cost <= h && residual * (day - 1) as f64 <= budget && best.is_none_or(|(c, _)| cost < c) {
                best = Some((cost, day));
            }
        }
        match best {
            Some((_, day)) => {
                if let Some(pmf) = pmf {
                    pmf.push((day, residual));
                }
                true
            }
            None => false,
        }
    }
}

/// Whether some `R`-robust policy places mass only on days with `g <= level`
/// (one feasibility test of the search).
pub fn is_level_feasible(g: &CostFunction, b: u64, r: f64, level: f64) -> Result<bool> {
    check_feasible(b, r)?;
    let filler = Filler { g, b, slack_rate: r - 1.0, growth: (1.0 / (b - 1) as f64).ln_1p() };
    Ok(filler.fill(level, None))
}

/// Minimum-level robust policy for cost `g`, found by binary search to within `epsilon`.
pub fn water_fill(g: &CostFunction, b: u64, r: f64, epsilon: f64) -> Result<WaterFill> {
    check_feasible(b, r)?;
    if !(epsilon > 0.0 && epsilon.is_finite()) {
        return Err(Error::InvalidArgument(format!("epsilon must be positive, got {epsilon}")));
    }
    let filler = Filler { g, b, slack_rate: r - 1.0, growth: (1.0 / (b - 1) as f64).ln_1p() };
    let level_bounds = (0.0, g.max_value());
    let (mut low, mut high) = level_bounds;
    if !filler.fill(high, None) {
        return Err(Error::Infeasible { b, r });
    }
    let mut checks = 0;
    while high - low > epsilon {
        let mid = 0.5 * (low + high);
        checks += 1;
        if filler.fill(mid, None) {
            high = mid;
        } else {
            low = mid;
        }
    }
    let mut pmf = Vec::new();
    filler.fill(high, Some(&mut pmf));
    let total: f64 = pmf.iter().map(|&(_, m)| m).sum();
    if let Some(last) = pmf.last_mut() {
        last.1 += 1.0 - total;
    }
    let mut merged: Vec<(u64, f64)> = Vec::with_capacity(pmf.len());
    for (day, mass) in pmf {
        match merged.last_mut() {
            Some(last) if last.0 == day => last.1 += mass,
            _ => merged.push((day, mass)),
        }
    }
    let policy = StoppingDistribution::new(merged)?;
    let objective = expected_policy_cost(&policy, g);
    Ok(WaterFill { policy, objective, level: high, checks, level_bounds })
}
