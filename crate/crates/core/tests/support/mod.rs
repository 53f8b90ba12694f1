//! Random instance and schedule generators shared by the integration tests.
#![allow(dead_code)]

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use storarb::cost_model::{CostFunction, QuadraticImpact, RateLimits};
use storarb::{Problem, Schedule};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Family {
    TwoPrice,
    Piecewise,
    Quadratic,
    Mixed,
}

/// Shape of the random instances: cost family, horizon range, and an
/// optional quantum that every capacity, rate, boundary level and breakpoint
/// is a multiple of.
#[derive(Debug, Clone, Copy)]
pub struct InstanceSpec {
    pub family: Family,
    pub min_periods: usize,
    pub max_periods: usize,
    pub max_capacity: f64,
    pub max_rate: f64,
    pub quantum: Option<f64>,
}

impl Default for InstanceSpec {
    fn default() -> Self {
        Self {
            family: Family::Mixed,
            min_periods: 2,
            max_periods: 48,
            max_capacity: 5.0,
            max_rate: 2.0,
            quantum: None,
        }
    }
}

fn draw(rng: &mut impl Rng, lo: f64, hi: f64, quantum: Option<f64>) -> f64 {
    match quantum {
        Some(q) => {
            let steps = ((hi - lo) / q).floor() as i64;
            lo + q * rng.random_range(0..=steps) as f64
        }
        None => rng.random_range(lo..=hi),
    }
}

pub fn random_cost(
    rng: &mut impl Rng,
    family: Family,
    rates: RateLimits,
    quantum: Option<f64>,
) -> CostFunction {
    let family = match family {
        Family::Mixed => {
            [Family::TwoPrice, Family::Piecewise, Family::Quadratic][rng.random_range(0..3)]
        }
        f => f,
    };
    let sell = rng.random_range(-2.0..10.0);
    let spread = if rng.random_bool(0.2) {
        0.0
    } else {
        rng.random_range(0.0..3.0)
    };
    match family {
        Family::TwoPrice => CostFunction::two_price(sell + spread, sell, rates).unwrap(),
        Family::Quadratic => CostFunction::quadratic(
            QuadraticImpact {
                buy_price: sell + spread,
                sell_price: sell,
                buy_curvature: rng.random_range(0.1..3.0),
                sell_curvature: rng.random_range(0.1..3.0),
            },
            rates,
        )
        .unwrap(),
        _ => {
            let mut xs = vec![-rates.p_out];
            for _ in 0..rng.random_range(0..4) {
                let x = draw(rng, -rates.p_out, rates.p_in, quantum);
                if x > -rates.p_out && x < rates.p_in {
                    xs.push(x);
                }
            }
            xs.sort_by(f64::total_cmp);
            xs.dedup();
            let mut slope = sell - rng.random_range(0.0..2.0);
            let points: Vec<(f64, f64)> = xs
                .iter()
                .map(|&x| {
                    let s = slope;
                    slope += rng.random_range(0.0..2.0);
                    (x, s)
                })
                .collect();
            CostFunction::piecewise(&points, rates).unwrap()
        }
    }
}

pub fn random_problem(rng: &mut impl Rng, spec: &InstanceSpec) -> Problem {
    let q = spec.quantum;
    let horizon = rng.random_range(spec.min_periods..=spec.max_periods);
    let min_unit = q.unwrap_or(0.1);
    let capacity = draw(rng, min_unit.max(0.25), spec.max_capacity, q);
    let p_in = draw(rng, min_unit.max(0.1), spec.max_rate, q);
    let p_out = draw(rng, min_unit.max(0.1), spec.max_rate, q);
    let rates = RateLimits::new(p_in, p_out).unwrap();
    let start = draw(rng, 0.0, capacity, q);
    let lo = (start - horizon as f64 * p_out).max(0.0);
    let hi = (start + horizon as f64 * p_in).min(capacity);
    let end = match q {
        Some(q) => {
            let a = (lo / q).ceil() as i64;
            let b = (hi / q).floor() as i64;
            q * rng.random_range(a..=b) as f64
        }
        None => rng.random_range(lo..=hi),
    };
    let costs = (0..horizon)
        .map(|_| random_cost(rng, spec.family, rates, q))
        .collect();
    Problem::new(capacity, start, end, costs).unwrap()
}

/// Levels from which the end level is still reachable, per time.
fn backward_band(p: &Problem) -> Vec<(f64, f64)> {
    let horizon = p.horizon();
    let mut band = vec![(0.0, 0.0); horizon + 1];
    band[horizon] = (p.end_level(), p.end_level());
    for t in (1..=horizon).rev() {
        let r = p.cost(t).rates();
        let (lo, hi) = band[t];
        band[t - 1] = ((lo - r.p_in).max(0.0), (hi + r.p_out).min(p.capacity()));
    }
    band
}

/// A random feasible schedule, biased towards the extremes of each
/// step's admissible range so that bang-bang paths are sampled too.
pub fn random_feasible_schedule(rng: &mut impl Rng, p: &Problem) -> Schedule {
    let band = backward_band(p);
    let horizon = p.horizon();
    let mut levels = vec![p.start_level()];
    for t in 1..=horizon {
        let prev = levels[t - 1];
        let r = p.cost(t).rates();
        let next = if t == horizon {
            p.end_level()
        } else {
            let lo = (prev - r.p_out).max(band[t].0).max(0.0);
            let hi = (prev + r.p_in).min(band[t].1).min(p.capacity()).max(lo);
            match rng.random_range(0..4) {
                0 => lo,
                1 => hi,
                2 => prev.clamp(lo, hi),
                _ => rng.random_range(lo..=hi),
            }
        };
        levels.push(next);
    }
    Schedule::from_levels(levels)
}
