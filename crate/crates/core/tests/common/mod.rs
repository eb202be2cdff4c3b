#![allow(dead_code)]

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use skirent_core::distributions::DayDistribution;
use skirent_core::randomized::{CostFunction, Segment};

/// Random distribution with `1..=max_atoms` atoms on days `1..=max_day`.
pub fn random_distribution(rng: &mut ChaCha8Rng, max_atoms: usize, max_day: u64) -> DayDistribution {
    let n = rng.gen_range(1..=max_atoms.min(max_day as usize));
    let mut days: Vec<u64> = Vec::with_capacity(n);
    while days.len() < n {
        let d = rng.gen_range(1..=max_day);
        if !days.contains(&d) {
            days.push(d);
        }
    }
    let weights: Vec<f64> = (0..n).map(|_| rng.gen_range(0.01..1.0)).collect();
    DayDistribution::from_weights(days.into_iter().zip(weights)).unwrap()
}

/// Strictly increasing cost with `pieces` linear pieces, flattening at a value no
/// lower than its last finite one.
pub fn increasing_cost(rng: &mut ChaCha8Rng, pieces: usize, span: u64) -> CostFunction {
    let mut segments = Vec::with_capacity(pieces + 1);
    let mut lo = 0;
    let mut value = rng.gen_range(1.0..10.0);
    for k in 0..pieces {
        let hi = if k + 1 == pieces { span } else { (lo + rng.gen_range(1..=span / pieces as u64 + 1)).min(span - 1) };
        if hi <= lo {
            continue;
        }
        let slope = rng.gen_range(0.05..1.0);
        let intercept = value - slope * lo as f64 + rng.gen_range(0.0..0.5);
        segments.push(Segment { lo, hi, slope, intercept });
        value = slope * hi as f64 + intercept;
        lo = hi;
    }
    segments.push(Segment { lo, hi: u64::MAX, slope: 0.0, intercept: value + 1.0 });
    CostFunction::new(segments).unwrap()
}
