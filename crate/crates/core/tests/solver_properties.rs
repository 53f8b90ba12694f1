mod support;

use proptest::prelude::*;
use storarb::oracle::{dp_solve, exhaustive_solve, GridSpec};
use storarb::solver::{classify_mu, objective, verify_certificate, Classification};
use storarb::{solve, Problem, Tolerances};
use support::{random_feasible_schedule, random_problem, rng, Family, InstanceSpec};

fn tol() -> Tolerances {
    Tolerances::default()
}

fn instance(seed: u64) -> Problem {
    random_problem(&mut rng(seed), &InstanceSpec::default())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn classification_is_monotone(seed in any::<u64>(), a in -15.0f64..15.0, b in -15.0f64..15.0) {
        let p = instance(seed);
        let (lo, hi) = if a < b { (a, b) } else { (b, a) };
        let at = |mu| classify_mu(&p, 0, p.start_level(), mu, &tol()).0;
        let (c_lo, c_hi) = (at(lo), at(hi));
        if c_lo.is_over() {
            prop_assert!(c_hi.is_over(), "{c_lo:?} at {lo} but {c_hi:?} at {hi}");
        }
        if c_hi.is_under() {
            prop_assert!(c_lo.is_under(), "{c_hi:?} at {hi} but {c_lo:?} at {lo}");
        }
    }

    #[test]
    fn solutions_are_certified_and_beat_random_schedules(seed in any::<u64>()) {
        let p = instance(seed);
        let sol = solve(&p).unwrap();
        let report = verify_certificate(&p, &sol.schedule, &sol.certificate, &tol());
        prop_assert!(report.is_certified(), "{:?}", report.details);
        let best = objective(&p, &sol.schedule, &tol()).unwrap();
        let mut r = rng(seed ^ 0x9e37_79b9);
        for _ in 0..50 {
            let s = random_feasible_schedule(&mut r, &p);
            prop_assert!(best <= objective(&p, &s, &tol()).unwrap() + 1e-9);
        }
    }

    #[test]
    fn segments_are_locally_optimal(seed in any::<u64>()) {
        let p = instance(seed);
        let sol = solve(&p).unwrap();
        let s = &sol.schedule;
        for seg in sol.certificate.segments() {
            let sub = p.subproblem(seg.start, seg.end, s.levels[seg.start], s.levels[seg.end]).unwrap();
            let part: f64 = (seg.start + 1..=seg.end)
                .map(|t| p.cost(t).evaluate_within(s.flows[t - 1], tol().x).unwrap())
                .sum();
            let again = solve(&sub).unwrap();
            let value = objective(&sub, &again.schedule, &tol()).unwrap();
            prop_assert!((value - part).abs() <= 1e-9 * (1.0 + part.abs()), "{value} vs {part}");
        }
    }

    #[test]
    fn slack_capacity_gives_one_multiplier(seed in any::<u64>()) {
        let q = instance(seed);
        let horizon = q.horizon() as f64;
        let rates = q.cost(1).rates();
        let level = horizon * rates.p_out;
        let p = Problem::new(level + horizon * rates.p_in, level, level, q.costs().to_vec()).unwrap();
        let sol = solve(&p).unwrap();
        prop_assert_eq!(sol.certificate.num_segments(), 1);
        let mu0 = sol.certificate.mu[0];
        prop_assert!(sol.certificate.mu.iter().all(|&m| m == mu0));
    }

    #[test]
    fn scaled_problems_scale_the_solution(seed in any::<u64>(), k in 0.1f64..20.0) {
        let p = instance(seed);
        let sol = solve(&p).unwrap();
        let pk = p.scaled(k).unwrap();
        let report = verify_certificate(&pk, &sol.schedule.scaled(k), &sol.certificate, &tol());
        prop_assert!(report.is_certified(), "{:?}", report.details);
        let direct = objective(&pk, &solve(&pk).unwrap().schedule, &tol()).unwrap();
        let image = k * objective(&p, &sol.schedule, &tol()).unwrap();
        prop_assert!((direct - image).abs() <= 1e-9 * (1.0 + image.abs()));
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(40))]

    #[test]
    fn exhaustive_search_agrees_with_dp(seed in any::<u64>()) {
        let spec = InstanceSpec {
            family: Family::Mixed,
            max_periods: 5,
            max_capacity: 2.0,
            max_rate: 1.0,
            quantum: Some(0.5),
            ..Default::default()
        };
        let p = random_problem(&mut rng(seed), &spec);
        let g = GridSpec::new(4).unwrap();
        let dp = dp_solve(&p, g).unwrap();
        prop_assert_eq!(exhaustive_solve(&p, g).unwrap(), dp.cost);
        let exact = objective(&p, &solve(&p).unwrap().schedule, &tol()).unwrap();
        prop_assert!(exact <= dp.cost + 1e-9);
    }

    #[test]
    fn commensurate_piecewise_instances_match_the_oracle(seed in any::<u64>()) {
        let spec = InstanceSpec {
            family: Family::Piecewise,
            max_periods: 12,
            max_capacity: 2.0,
            max_rate: 1.0,
            quantum: Some(0.25),
            ..Default::default()
        };
        let p = random_problem(&mut rng(seed), &spec);
        let dp = dp_solve(&p, GridSpec::new(20).unwrap()).unwrap();
        prop_assert!(dp.snap.is_exact(1e-12));
        let value = objective(&p, &solve(&p).unwrap().schedule, &tol()).unwrap();
        prop_assert!((value - dp.cost).abs() <= 1e-9, "{value} vs {}", dp.cost);
    }
}

#[test]
fn refinement_never_raises_the_oracle_cost() {
    let spec = InstanceSpec {
        family: Family::Quadratic,
        max_periods: 8,
        max_capacity: 2.0,
        max_rate: 1.0,
        quantum: Some(0.5),
        ..Default::default()
    };
    let mut r = rng(11);
    for _ in 0..10 {
        let p = random_problem(&mut r, &spec);
        let exact = objective(&p, &solve(&p).unwrap().schedule, &tol()).unwrap();
        let mut g = GridSpec::new(2).unwrap();
        let mut prev = dp_solve(&p, g).unwrap().cost;
        for _ in 0..5 {
            g = g.refined();
            let next = dp_solve(&p, g).unwrap().cost;
            assert!(next <= prev + 1e-12, "{next} > {prev}");
            assert!(next >= exact - 1e-9);
            prev = next;
        }
        assert!(prev - exact < 1e-2, "gap {} after refinement", prev - exact);
    }
}

#[test]
fn objective_is_the_sum_of_period_costs() {
    let p = instance(99);
    let sol = solve(&p).unwrap();
    let summed: f64 = (1..=p.horizon())
        .map(|t| {
            p.cost(t)
                .evaluate_within(sol.schedule.flows[t - 1], tol().x)
                .unwrap()
        })
        .sum();
    assert_eq!(objective(&p, &sol.schedule, &tol()).unwrap(), summed);
    assert!(matches!(
        classify_mu(&p, 0, p.start_level(), 1e6, &tol()).0,
        Classification::Over(_) | Classification::Feasible
    ));
}
