//! Optimal store scheduling by a forward, segment-by-segment construction of
//! a level trajectory and a piecewise-constant multiplier vector.
//!
//! The multiplier `mu` is a per-unit reference value of stored energy: in
//! each period the store moves by a flow minimizing `C_t(x) - mu*x`. The
//! construction keeps `mu` constant for as long as possible, letting it rise
//! only right after the store is full and fall only right after it is empty.
//! Such a pair is optimal, which [`verify_certificate`] checks independently.

mod band;
mod certificate;
mod search;

pub use band::{classify_mu, Classification, ReachBand, Side};
pub use certificate::{
    bang_bang_violations, verify_certificate, CertificateReport, MuCertificate, PinKind,
    SegmentInfo,
};
pub use search::{
    extract_segment, find_mu_bar, MuBracket, Segment, SegmentEnd, MAX_BRACKET_EXPANSIONS,
};

use crate::cost_model::CostFunction;
use crate::error::{Error, Result};
use crate::tolerance::Tolerances;

/// A finite-horizon arbitrage problem: `T` periods, capacity `E`, fixed
/// start and end levels, and one cost function per period.
#[derive(Debug, Clone, PartialEq)]
pub struct Problem {
    capacity: f64,
    start_level: f64,
    end_level: f64,
    costs: Vec<CostFunction>,
    slope_bounds: (f64, f64),
}

impl Problem {
    pub fn new(
        capacity: f64,
        start_level: f64,
        end_level: f64,
        costs: Vec<CostFunction>,
    ) -> Result<Self> {
        if !(capacity.is_finite() && capacity >= 0.0) {
            return Err(Error::InvalidProblem(format!(
                "capacity must be finite and non-negative, got {capacity}"
            )));
        }
        for (name, v) in [("start level", start_level), ("end level", end_level)] {
            if !(v.is_finite() && (0.0..=capacity).contains(&v)) {
                return Err(Error::InvalidProblem(format!(
                    "{name} {v} outside [0, {capacity}]"
                )));
            }
        }
        if costs.is_empty() {
            return Err(Error::InvalidProblem(
                "horizon must contain at least one period".into(),
            ));
        }
        let slope_bounds = costs
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |acc, c| {
                let (lo, hi) = c.slope_bounds();
                (acc.0.min(lo), acc.1.max(hi))
            });
        Ok(Self {
            capacity,
            start_level,
            end_level,
            costs,
            slope_bounds,
        })
    }

    /// Number of periods `T`.
    pub fn horizon(&self) -> usize {
        self.costs.len()
    }

    pub fn capacity(&self) -> f64 {
        self.capacity
    }

    pub fn start_level(&self) -> f64 {
        self.start_level
    }

    pub fn end_level(&self) -> f64 {
        self.end_level
    }

    pub fn costs(&self) -> &[CostFunction] {
        &self.costs
    }

    /// Cost function of period `t`, for `1 <= t <= T`.
    pub fn cost(&self, t: usize) -> &CostFunction {
        &self.costs[t - 1]
    }

    /// Smallest and largest finite marginal price over all periods.
    pub fn slope_bounds(&self) -> (f64, f64) {
        self.slope_bounds
    }

    /// The problem restricted to periods `start+1..=end` with the given
    /// boundary levels.
    pub fn subproblem(
        &self,
        start: usize,
        end: usize,
        start_level: f64,
        end_level: f64,
    ) -> Result<Self> {
        if start >= end || end > self.horizon() {
            return Err(Error::InvalidProblem(format!(
                "window ({start}, {end}] is not inside (0, {}]",
                self.horizon()
            )));
        }
        Self::new(
            self.capacity,
            start_level,
            end_level,
            self.costs[start..end].to_vec(),
        )
    }

    /// Scales capacity, rates and boundary levels by `k`, keeping marginal
    /// prices fixed.
    pub fn scaled(&self, k: f64) -> Result<Self> {
        let costs = self
            .costs
            .iter()
            .map(|c| c.scaled(k))
            .collect::<Result<Vec<_>>>()?;
        Self::new(
            self.capacity * k,
            self.start_level * k,
            self.end_level * k,
            costs,
        )
    }
}

/// Store levels `S_0..S_T` and per-period flows `x_t = S_t - S_{t-1}`.
#[derive(Debug, Clone, PartialEq)]
pub struct Schedule {
    pub levels: Vec<f64>,
    pub flows: Vec<f64>,
}

impl Schedule {
    pub fn from_levels(levels: Vec<f64>) -> Self {
        let flows = levels.windows(2).map(|w| w[1] - w[0]).collect();
        Self { levels, flows }
    }

    pub fn zero(horizon: usize, level: f64) -> Self {
        Self::from_levels(vec![level; horizon + 1])
    }

    pub fn horizon(&self) -> usize {
        self.flows.len()
    }

    pub fn scaled(&self, k: f64) -> Self {
        Self::from_levels(self.levels.iter().map(|s| s * k).collect())
    }
}

/// Everything that makes `s` infeasible for `p`, one message per problem.
pub fn feasibility_violations(p: &Problem, s: &Schedule, tol: &Tolerances) -> Vec<String> {
    let mut out = Vec::new();
    let horizon = p.horizon();
    if s.levels.len() != horizon + 1 || s.flows.len() != horizon {
        out.push(format!(
            "expected {} levels and {horizon} flows, got {} and {}",
            horizon + 1,
            s.levels.len(),
            s.flows.len()
        ));
        return out;
    }
    if (s.levels[0] - p.start_level).abs() > tol.x {
        out.push(format!("start level {} != {}", s.levels[0], p.start_level));
    }
    if (s.levels[horizon] - p.end_level).abs() > tol.x {
        out.push(format!(
            "end level {} != {}",
            s.levels[horizon], p.end_level
        ));
    }
    for t in 1..horizon {
        let level = s.levels[t];
        if !(level >= -tol.x && level <= p.capacity + tol.x) {
            out.push(format!("level S_{t} = {level} outside [0, {}]", p.capacity));
        }
    }
    for t in 1..=horizon {
        let x = s.flows[t - 1];
        let diff = s.levels[t] - s.levels[t - 1];
        let gap = (x - diff).abs();
        if gap.is_nan() || gap > tol.x {
            out.push(format!("flow x_{t} = {x} differs from level change {diff}"));
        }
        let dom = p.cost(t).domain();
        if !dom.contains(x, tol.x) {
            out.push(format!("flow x_{t} = {x} outside [{}, {}]", dom.lo, dom.hi));
        }
    }
    out
}

/// Total cost `sum_t C_t(x_t)`; negative values are profit.
pub fn objective(p: &Problem, s: &Schedule, tol: &Tolerances) -> Result<f64> {
    let violations = feasibility_violations(p, s, tol);
    if !violations.is_empty() {
        return Err(Error::InfeasibleSchedule(violations.join("; ")));
    }
    let mut total = 0.0;
    for (t, &x) in s.flows.iter().enumerate() {
        total += p.costs[t].evaluate_within(x, tol.x)?;
    }
    Ok(total)
}

/// An optimal schedule together with the multipliers certifying it.
#[derive(Debug, Clone, PartialEq)]
pub struct Solution {
    pub schedule: Schedule,
    pub certificate: MuCertificate,
}

pub fn solve(p: &Problem) -> Result<Solution> {
    solve_with(p, &Tolerances::default())
}

pub fn solve_with(p: &Problem, tol: &Tolerances) -> Result<Solution> {
    let horizon = p.horizon();
    let (slope_lo, slope_hi) = p.slope_bounds();
    let mut levels = Vec::with_capacity(horizon + 1);
    levels.push(p.start_level);
    let mut mu = Vec::with_capacity(horizon);
    let mut boundaries = vec![0];
    let mut pin_kinds = Vec::new();

    let mut t = 0;
    let mut level = p.start_level;
    let mut hint = (slope_lo, slope_hi);
    while t < horizon {
        let seg = match next_segment(p, t, level, hint, tol) {
            Err(Error::InternalInvariantViolation(_)) => {
                let tighter = tol.with_mu(tol.mu_for(p) * 1e-3);
                next_segment(p, t, level, hint, &tighter)?
            }
            other => other?,
        };
        let len = seg.end - seg.start;
        levels.extend_from_slice(&seg.levels);
        mu.extend(std::iter::repeat_n(seg.mu, len));
        // The previous bracket end stays on the same side of the next
        // segment's multiplier, so it seeds the next search.
        match seg.end_kind {
            SegmentEnd::Full => {
                pin_kinds.push(PinKind::Full);
                hint = (seg.bracket.lo, slope_hi);
            }
            SegmentEnd::Empty => {
                pin_kinds.push(PinKind::Empty);
                hint = (slope_lo, seg.bracket.hi);
            }
            SegmentEnd::Terminal => {}
        }
        boundaries.push(seg.end);
        t = seg.end;
        level = levels[t];
    }

    Ok(Solution {
        schedule: Schedule::from_levels(levels),
        certificate: MuCertificate {
            mu,
            boundaries,
            pin_kinds,
        },
    })
}

fn next_segment(
    p: &Problem,
    start: usize,
    level: f64,
    hint: (f64, f64),
    tol: &Tolerances,
) -> Result<Segment> {
    let bracket = find_mu_bar(p, start, level, hint, tol)?;
    extract_segment(p, start, level, bracket, tol)
}
