use serde::{Deserialize, Serialize};

use crate::distributions::DayDistribution;
use crate::error::{check_buy_cost, Error, Result};

/// Linear piece `g(t) = slope * t + intercept` for `lo < t <= hi`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Segment {
    pub lo: u64,
    pub hi: u64,
    pub slope: f64,
    pub intercept: f64,
}

impl Segment {
    pub fn eval(&self, t: u64) -> f64 {
        self.slope * t as f64 + self.intercept
    }

    pub fn is_unbounded(&self) -> bool {
        self.hi == u64::MAX
    }
}

/// Piecewise-linear cost of buying on day `t`, tiling `(0, infinity)`.
///
/// The last segment is unbounded and flat; its value is the cost of never buying.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CostFunction {
    segments: Vec<Segment>,
}

impl CostFunction {
    /// Validates and wraps segments. They must start at 0, be contiguous, have
    /// finite nonnegative slopes and end in an unbounded flat piece.
    pub fn new(segments: Vec<Segment>) -> Result<Self> {
        let bad = |msg: &str| Err(Error::InvalidArgument(format!("cost function: {msg}")));
        let Some(last) = segments.last() else {
            return bad("no segments");
        };
        if segments[0].lo != 0 {
            return bad("first segment must start at 0");
        }
        if !last.is_unbounded() || last.slope != 0.0 {
            return bad("last segment must be unbounded and flat");
        }
        for (i, s) in segments.iter().enumerate() {
            if s.lo >= s.hi {
                return bad("segment bounds must satisfy lo < hi");
            }
            if i + 1 < segments.len() && segments[i + 1].lo != s.hi {
                return bad("segments must be contiguous");
            }
            if !(s.slope.is_finite() && s.slope >= 0.0 && s.intercept.is_finite()) {
                return bad("slopes must be finite and nonnegative");
            }
        }
        Ok(Self { segments })
    }

    pub fn segments(&self) -> &[Segment] {
        &self.segments
    }

    /// Value for `t` beyond the last breakpoint.
    pub fn tail_value(&self) -> f64 {
        self.segments.last().expect("nonempty").intercept
    }

    /// Last finite breakpoint (largest support day for a prediction-derived cost).
    pub fn last_breakpoint(&self) -> u64 {
        self.segments.last().expect("nonempty").lo
    }

    pub fn eval(&self, t: u64) -> f64 {
        let idx = self.segments.partition_point(|s| s.hi < t);
        self.segments[idx.min(self.segments.len() - 1)].eval(t)
    }

    /// Minimum over all buy days; attained at some segment's first day.
    pub fn min_value(&self) -> f64 {
        self.segments.iter().map(|s| s.eval(s.lo + 1)).fold(f64::INFINITY, f64::min)
    }

    /// Maximum over all buy days; attained at some segment's last day.
    pub fn max_value(&self) -> f64 {
        self.segments
            .iter()
            .map(|s| if s.is_unbounded() { s.intercept } else { s.eval(s.hi) })
            .fold(f64::NEG_INFINITY, f64::max)
    }
}

/// Expected cost `g(t)` under prediction `p_hat` of buying on day `t`, in segment form.
pub fn build_cost_function(p_hat: &DayDistribution, b: u64) -> Result<CostFunction> {
    check_buy_cost(b)?;
    let mut segments = Vec::with_capacity(p_hat.len() + 1);
    let mut lo = 0;
    let mut rented = 0.0;
    for &(day, prob) in p_hat.atoms() {
        let slope = p_hat.survival(lo + 1);
        segments.push(Segment { lo, hi: day, slope, intercept: rented + (b - 1) as f64 * slope });
        rented += day as f64 * prob;
        lo = day;
    }
    segments.push(Segment { lo, hi: u64::MAX, slope: 0.0, intercept: p_hat.mean() });
    CostFunction::new(segments)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::deterministic::{expected_cost_threshold, Threshold};

    #[test]
    fn one_hot_shape() {
        let g = build_cost_function(&DayDistribution::point(7).unwrap(), 5).unwrap();
        for t in 1..=7 {
            assert_eq!(g.eval(t), (5 + t - 1) as f64);
        }
        assert_eq!(g.eval(8), 7.0);
        assert_eq!(g.eval(1000), 7.0);
        assert_eq!(g.min_value(), 5.0);
        assert_eq!(g.max_value(), 11.0);
    }

    #[test]
    fn matches_threshold_cost() {
        let p = DayDistribution::new([(1, 0.8), (5, 0.2)]).unwrap();
        let g = build_cost_function(&p, 3).unwrap();
        assert!((g.eval(2) - 1.6).abs() < 1e-12);
        for t in 1..12 {
            let direct = expected_cost_threshold(&p, 3, Threshold::Day(t)).unwrap();
            assert!((g.eval(t) - direct).abs() < 1e-12);
        }
    }

    #[test]
    fn rejects_malformed_segments() {
        let flat = Segment { lo: 0, hi: u64::MAX, slope: 0.0, intercept: 1.0 };
        assert!(CostFunction::new(vec![flat]).is_ok());
        assert!(CostFunction::new(vec![]).is_err());
        let gap = Segment { lo: 0, hi: 3, slope: 1.0, intercept: 0.0 };
        let late = Segment { lo: 4, ..flat };
        assert!(CostFunction::new(vec![gap, late]).is_err());
        let down = Segment { slope: -1.0, ..gap };
        assert!(CostFunction::new(vec![down, Segment { lo: 3, ..flat }]).is_err());
    }
}
