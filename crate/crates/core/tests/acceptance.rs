//! Acceptance suite. Runs every criterion in sequence (so the timing check is
//! not disturbed by other tests), prints one PASS/FAIL line each, and exits
//! non-zero if any fails.

mod support;

use std::process::{Command, ExitCode};
use std::time::{Duration, Instant};

use storarb::cli::{bench_horizon, run_once, RunConfig};
use storarb::dataio::{generate_prices, PriceSeries, Summary, SyntheticSpec};
use storarb::oracle::{dp_solve, GridSpec};
use storarb::solver::{bang_bang_violations, objective, verify_certificate};
use storarb::{solve_with, Problem, RateLimits, Tolerances};
use support::{random_feasible_schedule, random_problem, rng, Family, InstanceSpec};

const SOUNDNESS_INSTANCES: usize = 500;
const SOUNDNESS_TIME_LIMIT: Duration = Duration::from_secs(60);
const PIECEWISE_ORACLE_INSTANCES: usize = 100;
const CONVEX_ORACLE_INSTANCES: usize = 50;
/// Oracle grid step 0.01.
const ORACLE_LEVELS_PER_UNIT: u32 = 100;
const PIECEWISE_ORACLE_TOL: f64 = 1e-6;
const CONVEX_ORACLE_TOL: f64 = 1e-3;
const DOMINANCE_INSTANCES: usize = 50;
const DOMINANCE_SCHEDULES: usize = 1000;
const DOMINANCE_TOL: f64 = 1e-9;
const FIXTURE_ETAS: [f64; 3] = [0.85, 0.75, 0.65];
const SCALE_FACTORS: [f64; 2] = [2.0, 10.0];
const SCALING_INSTANCES: usize = 20;
const SHORT_HORIZON: usize = 4800;
const LONG_HORIZON: usize = 9600;
const TIME_RATIO_RANGE: (f64, f64) = (1.4, 2.6);
const SEGMENT_MEAN_RATIO_TOL: f64 = 0.10;
const TIMING_REPEATS: usize = 15;

type Outcome = Result<String, String>;
type Criterion = (&'static str, fn() -> Outcome);

fn check(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn tol() -> Tolerances {
    Tolerances::default()
}

/// 7 days of the default synthetic series with a 10-unit store filling at
/// one unit per period, empty at both ends.
fn fixture_prices() -> PriceSeries {
    generate_prices(&SyntheticSpec::default()).unwrap()
}

fn fixture_config(eta: f64) -> RunConfig {
    RunConfig {
        capacity: 10.0,
        rates: RateLimits::symmetric(1.0).unwrap(),
        eta,
        start_level: 0.0,
        end_level: 0.0,
        tolerances: tol(),
    }
}

fn certificate_soundness() -> Outcome {
    let mut r = rng(1);
    let spec = InstanceSpec::default();
    let instances: Vec<Problem> = (0..SOUNDNESS_INSTANCES)
        .map(|_| random_problem(&mut r, &spec))
        .collect();
    let (mut segments, mut active) = (0, 0);
    let start = Instant::now();
    for (i, p) in instances.iter().enumerate() {
        let sol = solve_with(p, &tol()).map_err(|e| format!("instance {i}: solve failed: {e}"))?;
        segments += sol.certificate.num_segments();
        active += sol
            .schedule
            .flows
            .iter()
            .filter(|x| x.abs() > tol().x)
            .count();
        let report = verify_certificate(p, &sol.schedule, &sol.certificate, &tol());
        check(report.is_certified(), || {
            format!(
                "instance {i}: fails {:?}: {:?}",
                report.failed_conditions(),
                report.details
            )
        })?;
    }
    let elapsed = start.elapsed();
    check(elapsed < SOUNDNESS_TIME_LIMIT, || {
        format!("took {elapsed:?}")
    })?;
    let periods: usize = instances.iter().map(Problem::horizon).sum();
    Ok(format!(
        "{SOUNDNESS_INSTANCES} instances certified in {:.3} s ({periods} periods, {active} active, {segments} segments)",
        elapsed.as_secs_f64()
    ))
}

fn oracle_equivalence() -> Outcome {
    let mut r = rng(2);
    let grid = GridSpec::new(ORACLE_LEVELS_PER_UNIT).unwrap();
    let mut worst = 0.0f64;
    for i in 0..PIECEWISE_ORACLE_INSTANCES {
        let spec = InstanceSpec {
            family: if i % 2 == 0 {
                Family::Piecewise
            } else {
                Family::TwoPrice
            },
            max_capacity: 3.0,
            max_rate: 1.0,
            quantum: Some(0.25),
            ..Default::default()
        };
        let p = random_problem(&mut r, &spec);
        let sol = solve_with(&p, &tol()).map_err(|e| format!("piecewise {i}: {e}"))?;
        let value = objective(&p, &sol.schedule, &tol()).unwrap();
        let dp = dp_solve(&p, grid).map_err(|e| format!("piecewise {i}: oracle: {e}"))?;
        check(dp.snap.is_exact(1e-12), || {
            format!("piecewise {i}: inputs off the grid")
        })?;
        let diff = (value - dp.cost).abs();
        worst = worst.max(diff);
        check(diff <= PIECEWISE_ORACLE_TOL, || {
            format!("piecewise {i}: solve {value} vs oracle {}", dp.cost)
        })?;
    }

    let mut worst_gap = 0.0f64;
    let (mut coarse_total, mut fine_total) = (0.0, 0.0);
    for i in 0..CONVEX_ORACLE_INSTANCES {
        let spec = InstanceSpec {
            family: Family::Quadratic,
            max_periods: 16,
            max_capacity: 2.0,
            max_rate: 1.0,
            quantum: Some(0.25),
            ..Default::default()
        };
        let p = random_problem(&mut r, &spec);
        let sol = solve_with(&p, &tol()).map_err(|e| format!("convex {i}: {e}"))?;
        let value = objective(&p, &sol.schedule, &tol()).unwrap();
        let coarse = dp_solve(&p, grid)
            .map_err(|e| format!("convex {i}: oracle: {e}"))?
            .cost;
        let fine = dp_solve(&p, grid.refined())
            .map_err(|e| format!("convex {i}: oracle: {e}"))?
            .cost;
        let (gap, fine_gap) = (coarse - value, fine - value);
        worst_gap = worst_gap.max(gap);
        check(value <= coarse + CONVEX_ORACLE_TOL, || {
            format!("convex {i}: solve {value} above oracle {coarse}")
        })?;
        check(gap >= -1e-9 && fine_gap >= -1e-9, || {
            format!("convex {i}: oracle {coarse}/{fine} below solve {value}")
        })?;
        check(fine_gap <= gap + 1e-12, || {
            format!("convex {i}: gap grew from {gap} to {fine_gap} on the finer grid")
        })?;
        coarse_total += gap;
        fine_total += fine_gap;
    }
    check(fine_total < coarse_total, || {
        format!("total gap did not shrink: {coarse_total} -> {fine_total}")
    })?;
    Ok(format!(
        "piecewise max |diff| {worst:.1e}; convex max gap {worst_gap:.1e}, total {coarse_total:.2e} -> {fine_total:.2e} on halving"
    ))
}

fn dominance() -> Outcome {
    let mut r = rng(3);
    let spec = InstanceSpec::default();
    let mut min_margin = f64::INFINITY;
    for i in 0..DOMINANCE_INSTANCES {
        let p = random_problem(&mut r, &spec);
        let sol = solve_with(&p, &tol()).map_err(|e| format!("instance {i}: {e}"))?;
        let best = objective(&p, &sol.schedule, &tol()).unwrap();
        for j in 0..DOMINANCE_SCHEDULES {
            let s = random_feasible_schedule(&mut r, &p);
            let other =
                objective(&p, &s, &tol()).map_err(|e| format!("instance {i} schedule {j}: {e}"))?;
            min_margin = min_margin.min(other - best);
            check(best <= other + DOMINANCE_TOL, || {
                format!("instance {i}: schedule {j} costs {other} < {best}")
            })?;
        }
    }
    Ok(format!(
        "{} random schedules, smallest margin {min_margin:.1e}",
        DOMINANCE_INSTANCES * DOMINANCE_SCHEDULES
    ))
}

fn bang_bang_structure() -> Outcome {
    let prices = fixture_prices();
    let mut active = Vec::new();
    for eta in FIXTURE_ETAS {
        let config = fixture_config(eta);
        let run = run_once(&config, &prices).map_err(|e| format!("eta {eta}: {e}"))?;
        let p = config.problem(&prices).unwrap();
        let bad = bang_bang_violations(&p, &run.solution, &tol());
        check(bad.is_empty(), || {
            format!("eta {eta}: threshold rule broken at periods {bad:?}")
        })?;
        active.push(run.active_periods);
    }
    check(active.windows(2).all(|w| w[1] <= w[0]), || {
        format!("active periods {active:?} for eta {FIXTURE_ETAS:?}")
    })?;
    Ok(format!(
        "active periods {active:?} for eta {FIXTURE_ETAS:?}"
    ))
}

fn scaling_invariance() -> Outcome {
    let mut r = rng(5);
    let spec = InstanceSpec::default();
    for i in 0..SCALING_INSTANCES {
        let p = random_problem(&mut r, &spec);
        let sol = solve_with(&p, &tol()).map_err(|e| format!("instance {i}: {e}"))?;
        for k in SCALE_FACTORS {
            let pk = p.scaled(k).unwrap();
            let sk = sol.schedule.scaled(k);
            let report = verify_certificate(&pk, &sk, &sol.certificate, &tol());
            check(report.is_certified(), || {
                format!(
                    "instance {i}, k = {k}: fails {:?}: {:?}",
                    report.failed_conditions(),
                    report.details
                )
            })?;
        }
    }
    Ok(format!(
        "{SCALING_INSTANCES} instances certified at k = {SCALE_FACTORS:?}"
    ))
}

fn regime_limits() -> Outcome {
    // capacity never binding: start and end far enough from both bounds
    let mut r = rng(6);
    let mut checked = 0;
    for i in 0..20 {
        let q = random_problem(&mut r, &InstanceSpec::default());
        let horizon = q.horizon() as f64;
        let rates = q.cost(1).rates();
        let level = horizon * rates.p_out;
        let capacity = level + horizon * rates.p_in;
        let p = Problem::new(capacity, level, level, q.costs().to_vec()).unwrap();
        let sol = solve_with(&p, &tol()).map_err(|e| format!("slack {i}: {e}"))?;
        let n = sol.certificate.num_segments();
        check(n == 1, || format!("slack instance {i}: {n} segments"))?;
        checked += 1;
    }
    let prices = fixture_prices();
    let horizon = prices.len() as f64;
    let slack = RunConfig {
        capacity: 2.0 * horizon,
        start_level: horizon,
        end_level: horizon,
        ..fixture_config(0.75)
    };
    let n = run_once(&slack, &prices)
        .map_err(|e| e.to_string())?
        .solution
        .certificate
        .num_segments();
    check(n == 1, || format!("slack fixture: {n} segments"))?;

    // rates at least the capacity: every action fills, empties, or lands on the end level
    let mut fast_active = Vec::new();
    for rate in [1.0, 2.0] {
        let config = RunConfig {
            capacity: 1.0,
            rates: RateLimits::symmetric(rate).unwrap(),
            ..fixture_config(0.75)
        };
        let run = run_once(&config, &prices).map_err(|e| format!("P = {rate}: {e}"))?;
        let s = &run.solution.schedule;
        let t_end = s.horizon();
        for t in 1..=t_end {
            if s.flows[t - 1].abs() <= tol().x {
                continue;
            }
            let level = s.levels[t];
            let on_bound = level.abs() <= tol().x
                || (level - config.capacity).abs() <= tol().x
                || (t == t_end && (level - config.end_level).abs() <= tol().x);
            check(on_bound, || {
                format!("P = {rate}: period {t} stops at level {level}")
            })?;
        }
        fast_active.push(run.active_periods);
    }
    Ok(format!(
        "{} slack instances with one segment; P >= E actions all reach a bound ({fast_active:?} active)",
        checked + 1
    ))
}

fn locality_and_linearity() -> Outcome {
    let spec = SyntheticSpec {
        noise_std: 0.0,
        ..Default::default()
    };
    let config = fixture_config(0.75);
    // warm up caches and the allocator
    bench_horizon(&config, &spec, SHORT_HORIZON, 1).map_err(|e| e.to_string())?;
    let short =
        bench_horizon(&config, &spec, SHORT_HORIZON, TIMING_REPEATS).map_err(|e| e.to_string())?;
    let long =
        bench_horizon(&config, &spec, LONG_HORIZON, TIMING_REPEATS).map_err(|e| e.to_string())?;
    let time_ratio = long.wall_ms / short.wall_ms;
    let mean_ratio = long.mean_segment / short.mean_segment;
    let detail = format!(
        "time {:.2} ms -> {:.2} ms (x{time_ratio:.2}); mean segment {:.3} -> {:.3} (x{mean_ratio:.3})",
        short.wall_ms, long.wall_ms, short.mean_segment, long.mean_segment
    );
    check(
        (TIME_RATIO_RANGE.0..=TIME_RATIO_RANGE.1).contains(&time_ratio),
        || detail.clone(),
    )?;
    check((mean_ratio - 1.0).abs() <= SEGMENT_MEAN_RATIO_TOL, || {
        detail.clone()
    })?;
    Ok(detail)
}

fn determinism() -> Outcome {
    let bin = env!("CARGO_BIN_EXE_storarb");
    let dirs = [tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap()];
    for d in &dirs {
        let status = Command::new(bin)
            .args([
                "solve",
                "--synthetic",
                "days=7,seed=42",
                "--eta",
                "0.75",
                "--capacity",
                "10",
            ])
            .arg("--out")
            .arg(d.path())
            .output()
            .map_err(|e| e.to_string())?;
        check(status.status.success(), || {
            format!("solve exited with {}", status.status)
        })?;
    }
    let mut bytes = 0;
    for name in ["schedule.csv", "summary.json"] {
        let a = std::fs::read(dirs[0].path().join(name)).map_err(|e| e.to_string())?;
        let b = std::fs::read(dirs[1].path().join(name)).map_err(|e| e.to_string())?;
        check(a == b, || format!("{name} differs between runs"))?;
        bytes += a.len();
    }
    let summary: Summary =
        serde_json::from_slice(&std::fs::read(dirs[0].path().join("summary.json")).unwrap())
            .unwrap();
    Ok(format!(
        "{bytes} bytes identical across runs (objective {})",
        summary.objective
    ))
}

fn main() -> ExitCode {
    let criteria: [Criterion; 8] = [
        ("1 certificate soundness", certificate_soundness),
        ("2 oracle equivalence", oracle_equivalence),
        ("3 dominance", dominance),
        ("4 bang-bang structure", bang_bang_structure),
        ("5 scaling invariance", scaling_invariance),
        ("6 regime limits", regime_limits),
        ("7 locality and linearity", locality_and_linearity),
        ("8 determinism", determinism),
    ];
    let mut failed = 0;
    for (name, run) in criteria {
        match run() {
            Ok(detail) => println!("PASS  {name}: {detail}"),
            Err(detail) => {
                failed += 1;
                println!("FAIL  {name}: {detail}");
            }
        }
    }
    if failed == 0 {
        println!("acceptance: all {} criteria passed", criteria.len());
        ExitCode::SUCCESS
    } else {
        println!("acceptance: {failed} of {} criteria failed", criteria.len());
        ExitCode::FAILURE
    }
}
