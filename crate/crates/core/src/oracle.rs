//! Reference optimizers over a discretized level grid.
//!
//! These never share code with the multiplier solver beyond cost evaluation:
//! [`dp_solve`] is a backward dynamic program and [`exhaustive_solve`] a
//! brute-force enumeration for tiny instances. When capacity, boundary
//! levels, rates and all piecewise-linear breakpoints are multiples of the
//! grid step, the grid optimum is the true optimum.

use crate::cost_model::CostFunction;
use crate::error::{Error, Result};
use crate::solver::{Problem, Schedule};

pub const MAX_EXHAUSTIVE_PERIODS: usize = 6;
pub const MAX_EXHAUSTIVE_PATHS: u128 = 10_000_000;

/// Grid of levels with step `1 / levels_per_unit`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct GridSpec {
    pub levels_per_unit: u32,
}

impl GridSpec {
    pub fn new(levels_per_unit: u32) -> Result<Self> {
        if levels_per_unit == 0 {
            return Err(Error::InvalidProblem(
                "grid needs at least one level per unit".into(),
            ));
        }
        Ok(Self { levels_per_unit })
    }

    pub fn step(&self) -> f64 {
        1.0 / self.levels_per_unit as f64
    }

    pub fn refined(&self) -> Self {
        Self {
            levels_per_unit: self.levels_per_unit * 2,
        }
    }
}

/// How far the problem's inputs moved when snapped onto the grid.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct SnapReport {
    pub capacity: f64,
    pub start_level: f64,
    pub end_level: f64,
    /// Largest rate reduction over all periods (rates are rounded down).
    pub rates: f64,
}

impl SnapReport {
    pub fn max(&self) -> f64 {
        self.capacity
            .max(self.start_level)
            .max(self.end_level)
            .max(self.rates)
    }

    /// True when every input already sat on the grid (up to `tol`).
    pub fn is_exact(&self, tol: f64) -> bool {
        self.max() <= tol
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GridSolution {
    pub cost: f64,
    pub schedule: Schedule,
    pub snap: SnapReport,
}

struct Grid {
    n: f64,
    top: usize,
    start: usize,
    end: usize,
    /// Per period: (max steps out, max steps in).
    steps: Vec<(usize, usize)>,
    snap: SnapReport,
}

impl Grid {
    fn new(p: &Problem, g: GridSpec) -> Self {
        let n = g.levels_per_unit as f64;
        let snap_level = |v: f64| (v * n).round();
        let top = snap_level(p.capacity());
        let start = snap_level(p.start_level());
        let end = snap_level(p.end_level());
        let mut rate_snap = 0.0f64;
        let steps = p
            .costs()
            .iter()
            .map(|c| {
                let r = c.rates();
                let down = |v: f64| (v * n + 1e-9).floor().max(0.0);
                let (o, i) = (down(r.p_out), down(r.p_in));
                rate_snap = rate_snap
                    .max((r.p_out - o / n).abs())
                    .max((r.p_in - i / n).abs());
                (o as usize, i as usize)
            })
            .collect();
        Self {
            n,
            top: top as usize,
            start: start as usize,
            end: end as usize,
            steps,
            snap: SnapReport {
                capacity: (p.capacity() - top / n).abs(),
                start_level: (p.start_level() - start / n).abs(),
                end_level: (p.end_level() - end / n).abs(),
                rates: rate_snap,
            },
        }
    }

    fn level(&self, i: usize) -> f64 {
        i as f64 / self.n
    }

    /// Cost of each step count `-out..=in`, indexed from `-out`.
    fn step_costs(&self, c: &CostFunction, t: usize) -> Vec<f64> {
        let (o, i) = self.steps[t - 1];
        let dom = c.domain();
        (0..=o + i)
            .map(|j| {
                let x = (j as f64 - o as f64) / self.n;
                c.value_at(dom.nearest(x))
            })
            .collect()
    }
}

/// Exact optimum of the problem over grid-valued level sequences.
pub fn dp_solve(p: &Problem, g: GridSpec) -> Result<GridSolution> {
    let grid = Grid::new(p, g);
    let horizon = p.horizon();
    let width = grid.top + 1;
    let mut value = vec![f64::INFINITY; width];
    value[grid.end] = 0.0;
    // choice[t-1][s] = level index at time t when at level s at time t-1
    let mut choice = vec![vec![usize::MAX; width]; horizon];

    for t in (1..=horizon).rev() {
        let costs = grid.step_costs(p.cost(t), t);
        let (o, _) = grid.steps[t - 1];
        let mut prev = vec![f64::INFINITY; width];
        for s in 0..width {
            let lo = s.saturating_sub(o);
            let hi = (s + grid.steps[t - 1].1).min(grid.top);
            let mut best = f64::INFINITY;
            let mut arg = usize::MAX;
            for next in lo..=hi {
                let v = value[next];
                if v == f64::INFINITY {
                    continue;
                }
                let total = costs[next + o - s] + v;
                if total < best {
                    best = total;
                    arg = next;
                }
            }
            prev[s] = best;
            choice[t - 1][s] = arg;
        }
        value = prev;
    }

    let cost = value[grid.start];
    if cost == f64::INFINITY {
        return Err(Error::GridInfeasible {
            end_level: grid.level(grid.end),
        });
    }
    let mut levels = Vec::with_capacity(horizon + 1);
    let mut s = grid.start;
    levels.push(grid.level(s));
    for row in &choice {
        s = row[s];
        levels.push(grid.level(s));
    }
    Ok(GridSolution {
        cost,
        schedule: Schedule::from_levels(levels),
        snap: grid.snap,
    })
}

/// Brute-force minimum over every grid-valued level sequence; only for
/// `T <= 6` and at most 10^7 paths.
pub fn exhaustive_solve(p: &Problem, g: GridSpec) -> Result<f64> {
    let grid = Grid::new(p, g);
    let horizon = p.horizon();
    let paths = count_paths(&grid, horizon);
    if horizon > MAX_EXHAUSTIVE_PERIODS || paths > MAX_EXHAUSTIVE_PATHS {
        return Err(Error::TooLarge {
            paths,
            limit: MAX_EXHAUSTIVE_PATHS,
        });
    }
    let costs: Vec<Vec<f64>> = (1..=horizon)
        .map(|t| grid.step_costs(p.cost(t), t))
        .collect();
    let best = enumerate(&grid, &costs, 0, grid.start);
    if best == f64::INFINITY {
        return Err(Error::GridInfeasible {
            end_level: grid.level(grid.end),
        });
    }
    Ok(best)
}

fn enumerate(grid: &Grid, costs: &[Vec<f64>], t: usize, s: usize) -> f64 {
    if t == costs.len() {
        return if s == grid.end { 0.0 } else { f64::INFINITY };
    }
    let (o, i) = grid.steps[t];
    let mut best = f64::INFINITY;
    for next in s.saturating_sub(o)..=(s + i).min(grid.top) {
        let rest = enumerate(grid, costs, t + 1, next);
        let total = costs[t][next + o - s] + rest;
        if total < best {
            best = total;
        }
    }
    best
}

/// Number of in-range grid paths the enumeration visits.
fn count_paths(grid: &Grid, horizon: usize) -> u128 {
    let mut ways = vec![0u128; grid.top + 1];
    ways[grid.start] = 1;
    for t in 0..horizon {
        let (o, i) = grid.steps[t];
        let mut next = vec![0u128; grid.top + 1];
        for (s, &w) in ways.iter().enumerate() {
            if w == 0 {
                continue;
            }
            for n in &mut next[s.saturating_sub(o)..=(s + i).min(grid.top)] {
                *n = n.saturating_add(w);
            }
        }
        ways = next;
    }
    ways.iter().fold(0u128, |a, &w| a.saturating_add(w))
}
