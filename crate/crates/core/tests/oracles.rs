mod common;

use approx::assert_relative_eq;
use common::{increasing_cost, random_distribution};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use skirent_core::deterministic::{
    cr_bound_early, cr_bound_late, exact_ecr, expected_cost_threshold, optimal_threshold, sufficient_condition_check,
    threshold_cost, Threshold,
};
use skirent_core::distributions::DayDistribution;
use skirent_core::oracle::{brute_force_threshold, lp_solve, lp_solve_with, LpInstance, PivotRule};
use skirent_core::randomized::{
    build_cost_function, check_robustness, default_epsilon, expected_policy_cost, geometric_cdf, onehot_exact,
    realized_worst_ratio, water_fill,
};
use skirent_core::Error;

#[test]
fn scan_matches_brute_force() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for _ in 0..1000 {
        let p = random_distribution(&mut rng, 12, 200);
        let b = rng.gen_range(2..=120);
        let (t_fast, v_fast) = optimal_threshold(&p, b).unwrap();
        let (t_slow, v_slow) = brute_force_threshold(&p, b).unwrap();
        assert_relative_eq!(v_fast, v_slow, max_relative = 1e-9);
        if t_fast != t_slow {
            // Ties may resolve to different days, never to different values.
            let alt = expected_cost_threshold(&p, b, t_slow).unwrap();
            assert_relative_eq!(alt, v_fast, max_relative = 1e-9);
        }
    }
}

#[test]
fn bounds_dominate_exact_ratio() {
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    let mut checked = 0;
    for _ in 0..1000 {
        let p = random_distribution(&mut rng, 10, 150);
        let b = rng.gen_range(2..=80);
        if p.survival(b) <= 0.0 {
            assert_eq!(cr_bound_early(&p, b, Threshold::Day(1)), Err(Error::DegenerateTail));
            continue;
        }
        let t = rng.gen_range(1..=2 * b);
        let ecr = exact_ecr(&p, b, Threshold::Day(t)).unwrap();
        let bound = if t <= b {
            cr_bound_early(&p, b, Threshold::Day(t)).unwrap()
        } else {
            cr_bound_late(&p, b, Threshold::Day(t)).unwrap()
        };
        assert!(bound >= ecr - 1e-9, "b = {b}, t = {t}: bound {bound} < ratio {ecr}");
        checked += 1;
    }
    assert!(checked > 300);
}

#[test]
fn sufficient_condition_is_sound() {
    let mut rng = ChaCha8Rng::seed_from_u64(13);
    let mut certified = 0;
    for _ in 0..2000 {
        let p = random_distribution(&mut rng, 10, 150);
        let b = rng.gen_range(2..=80);
        if p.survival(b) <= 0.0 {
            continue;
        }
        let t = rng.gen_range(1..=2 * b);
        let c = rng.gen_range(1.05..4.0);
        if sufficient_condition_check(&p, b, Threshold::Day(t), c).unwrap() {
            certified += 1;
            let ecr = exact_ecr(&p, b, Threshold::Day(t)).unwrap();
            assert!(ecr <= c + 1e-9, "b = {b}, t = {t}, c = {c}: ratio {ecr}");
        }
    }
    assert!(certified > 100);
}

#[test]
fn pivot_rules_agree() {
    let mut rng = ChaCha8Rng::seed_from_u64(14);
    for _ in 0..40 {
        let p = random_distribution(&mut rng, 6, 40);
        let b = rng.gen_range(3..=12);
        let r = rng.gen_range(1.6..3.0);
        let inst = LpInstance::from_cost(&build_cost_function(&p, b).unwrap(), b, r).unwrap();
        match (lp_solve_with(&inst, PivotRule::Bland), lp_solve_with(&inst, PivotRule::Dantzig)) {
            (Ok((_, a)), Ok((_, d))) => assert_relative_eq!(a, d, max_relative = 1e-8),
            (Err(a), Err(d)) => assert_eq!(a, d),
            (a, d) => panic!("rules disagree: {a:?} vs {d:?}"),
        }
    }
}

#[test]
fn lp_solutions_are_robust_and_dominate_water_fill() {
    let mut rng = ChaCha8Rng::seed_from_u64(15);
    let mut solved = 0;
    for _ in 0..150 {
        let p = random_distribution(&mut rng, 8, 60);
        let b = rng.gen_range(3..=15);
        let r = rng.gen_range(1.5..3.0);
        let g = build_cost_function(&p, b).unwrap();
        let inst = LpInstance::from_cost(&g, b, r).unwrap();
        let Ok((f, value)) = lp_solve(&inst) else {
            assert!(water_fill(&g, b, r, default_epsilon(&g)).is_err());
            continue;
        };
        solved += 1;
        assert!(check_robustness(&f, b, r).unwrap().feasible);
        assert_relative_eq!(expected_policy_cost(&f, &g), value, max_relative = 1e-8);
        let wf = water_fill(&g, b, r, default_epsilon(&g)).unwrap();
        assert!(wf.objective >= value - 1e-7 * value.max(1.0));
        let top = f.pmf().iter().filter(|a| a.1 > 1e-9).map(|a| g.eval(a.0)).fold(0.0_f64, f64::max);
        assert!(wf.level <= top + 2.0 * default_epsilon(&g), "level {} above {top}", wf.level);
    }
    assert!(solved > 50);
}

#[test]
fn geometric_policy_is_lp_optimal_for_increasing_costs() {
    let mut rng = ChaCha8Rng::seed_from_u64(16);
    for _ in 0..60 {
        let b = rng.gen_range(3..=14);
        let r = rng.gen_range(1.6..3.0);
        let pieces = rng.gen_range(1..=4);
        let g = increasing_cost(&mut rng, pieces, 3 * b);
        let inst = LpInstance::from_cost(&g, b, r).unwrap();
        match (geometric_cdf(b, r), lp_solve(&inst)) {
            (Ok(f), Ok((_, value))) => {
                assert_relative_eq!(expected_policy_cost(&f, &g), value, max_relative = 1e-7);
            }
            (Err(Error::Infeasible { .. }), Err(Error::Infeasible { .. })) => {}
            (a, l) => panic!("b = {b}, R = {r}: {a:?} vs {l:?}"),
        }
    }
}

#[test]
fn onehot_matches_lp_beyond_the_grid() {
    for (b, r) in [(13, 1.8), (15, 2.2), (16, 1.65)] {
        for y in 1..=3 * b {
            let g = build_cost_function(&DayDistribution::point(y).unwrap(), b).unwrap();
            let (_, value) = lp_solve(&LpInstance::from_cost(&g, b, r).unwrap()).unwrap();
            let sol = onehot_exact(b, r, y).unwrap();
            assert_relative_eq!(sol.objective, value, max_relative = 1e-7);
            assert_relative_eq!(expected_policy_cost(&sol.policy, &g), value, max_relative = 1e-7);
        }
    }
}

#[test]
fn robust_policies_have_bounded_worst_ratio() {
    let mut rng = ChaCha8Rng::seed_from_u64(17);
    for _ in 0..200 {
        let p = random_distribution(&mut rng, 10, 300);
        let b = rng.gen_range(4..=100);
        let r = rng.gen_range(1.7..3.0);
        let g = build_cost_function(&p, b).unwrap();
        let wf = water_fill(&g, b, r, default_epsilon(&g)).unwrap();
        let horizon = wf.policy.max_day().max(b) + b;
        assert!(realized_worst_ratio(&wf.policy, b, horizon).unwrap() <= r + 1e-9);
    }
}

#[test]
fn monte_carlo_agrees_with_expected_cost() {
    let mut rng = ChaCha8Rng::seed_from_u64(18);
    let p = DayDistribution::new([(30, 0.7), (120, 0.3)]).unwrap();
    let (b, r) = (50, 1.7);
    let g = build_cost_function(&p, b).unwrap();
    let f = water_fill(&g, b, r, default_epsilon(&g)).unwrap().policy;
    let sample = |rng: &mut ChaCha8Rng, atoms: &[(u64, f64)]| {
        let u: f64 = rng.gen();
        let mut acc = 0.0;
        for &(d, m) in atoms {
            acc += m;
            if u < acc {
                return d;
            }
        }
        atoms.last().unwrap().0
    };
    let n = 200_000;
    let mut total = 0.0;
    for _ in 0..n {
        let z = sample(&mut rng, f.pmf());
        let d = sample(&mut rng, p.atoms());
        total += threshold_cost(b, Threshold::Day(z), d);
    }
    let estimate = total / n as f64;
    let exact = expected_policy_cost(&f, &g);
    assert!((estimate - exact).abs() < 0.01 * exact, "{estimate} vs {exact}");
}
