use super::band::{classify_only, propagate};
use super::{Classification, Problem};
use crate::cost_model::Interval;
use crate::error::{Error, Result};
use crate::tolerance::Tolerances;

/// Upper bound on bracket doublings in either direction.
pub const MAX_BRACKET_EXPANSIONS: usize = 60;

/// A narrow bracket around the supremum of the multipliers classified
/// `Under` from a segment start.
///
/// `lo` classifies `Under` and `hi` does not, and `hi - lo <= tol_mu`. The one
/// exception is a start from which even the lowest multiplier is feasible;
/// the bracket is then a single point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MuBracket {
    pub lo: f64,
    pub hi: f64,
}

impl MuBracket {
    /// The bracket's representative value: the smallest multiplier known
    /// not to be `Under`.
    pub fn value(&self) -> f64 {
        self.hi
    }

    pub fn mid(&self) -> f64 {
        self.lo + 0.5 * (self.hi - self.lo)
    }

    /// Union over the bracket of the minimizer intervals of period `t`.
    fn flows(&self, p: &Problem, t: usize) -> Interval {
        let c = p.cost(t);
        Interval::new(
            c.minimizer_interval(self.lo).lo,
            c.minimizer_interval(self.hi).hi,
        )
    }
}

/// Bisects for the supremum of `{mu : classify(mu) = Under}` from
/// `(start_time, start_level)`, starting from `bracket` and widening it by
/// doubling when an end sits on the wrong side.
pub fn find_mu_bar(
    p: &Problem,
    start_time: usize,
    start_level: f64,
    bracket: (f64, f64),
    tol: &Tolerances,
) -> Result<MuBracket> {
    let (slope_lo, slope_hi) = p.slope_bounds();
    let tol_mu = tol.mu_for(p);
    let classify = |mu: f64| classify_only(p, start_time, start_level, mu, tol.x);
    let span = (slope_hi - slope_lo).max(1.0);

    let mut lo = bracket.0.min(bracket.1);
    let mut width = span.max(bracket.1 - bracket.0);
    let mut expansions = 0;
    loop {
        match classify(lo) {
            Classification::Under(_) => break,
            class => {
                // Below every marginal price nothing changes any more.
                if lo < slope_lo || expansions >= MAX_BRACKET_EXPANSIONS {
                    if class == Classification::Feasible {
                        return Ok(MuBracket { lo, hi: lo });
                    }
                    return Err(Error::InfeasibleProblem(format!(
                        "from level {start_level} at time {start_time} the end level {} \
                         cannot be reached even when selling at every opportunity",
                        p.end_level()
                    )));
                }
                lo -= width;
                width *= 2.0;
                expansions += 1;
            }
        }
    }

    let mut hi = bracket.0.max(bracket.1);
    if hi <= lo {
        hi = lo + span;
    }
    let mut width = span;
    let mut expansions = 0;
    while classify(hi).is_under() {
        if hi > slope_hi || expansions >= MAX_BRACKET_EXPANSIONS {
            return Err(Error::InfeasibleProblem(format!(
                "from level {start_level} at time {start_time} the end level {} \
                 cannot be reached even when buying at every opportunity",
                p.end_level()
            )));
        }
        lo = hi;
        hi += width;
        width *= 2.0;
        expansions += 1;
    }

    while hi - lo > tol_mu {
        let mid = lo + 0.5 * (hi - lo);
        if mid <= lo || mid >= hi {
            break;
        }
        if classify(mid).is_under() {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(MuBracket { lo, hi })
}

/// How a segment ends.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SegmentEnd {
    /// Store full at the segment end; the multiplier may rise afterwards.
    Full,
    /// Store empty at the segment end; the multiplier may fall afterwards.
    Empty,
    /// The segment reaches the horizon and lands on the end level.
    Terminal,
}

/// Levels and multiplier over one segment `(start, end]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Segment {
    pub start: usize,
    pub end: usize,
    pub end_kind: SegmentEnd,
    /// Levels at times `start+1..=end`.
    pub levels: Vec<f64>,
    /// Multiplier certifying every flow of the segment.
    pub mu: f64,
    pub bracket: MuBracket,
}

/// Builds the segment starting at `(start_time, start_level)` from the
/// bracket returned by [`find_mu_bar`].
///
/// Flows are drawn from the minimizer sets of multipliers inside the
/// bracket. The band reachable under those flows decides the case: it lands
/// on the end level (terminal segment), or it first fails below zero (the
/// segment ends at the last time the store can be full), or above capacity
/// (the segment ends at the last time it can be empty). Levels are then
/// recovered backwards from the pinned end, taking in each period the flow
/// closest to zero.
pub fn extract_segment(
    p: &Problem,
    start_time: usize,
    start_level: f64,
    bracket: MuBracket,
    tol: &Tolerances,
) -> Result<Segment> {
    let horizon = p.horizon();
    let cap = p.capacity();
    let mut forward = Vec::new();
    let class = propagate(
        p,
        start_time,
        start_level,
        tol.x,
        |t| bracket.flows(p, t),
        Some(&mut forward),
    );

    let last_where = |pred: &dyn Fn(Interval) -> bool, before: usize| {
        (start_time + 1..before.min(horizon))
            .rev()
            .find(|&t| pred(forward[t - start_time]))
    };
    let (end, target, end_kind) = match class {
        Classification::Feasible => (horizon, p.end_level(), SegmentEnd::Terminal),
        Classification::Under(fail) => {
            let t = last_where(&|b| b.hi >= cap - tol.x, fail).ok_or_else(|| {
                Error::InternalInvariantViolation(format!(
                    "segment from t={start_time} runs empty at t={fail} without filling first"
                ))
            })?;
            (t, cap, SegmentEnd::Full)
        }
        Classification::Over(fail) => {
            let t = last_where(&|b| b.lo <= tol.x, fail).ok_or_else(|| {
                Error::InternalInvariantViolation(format!(
                    "segment from t={start_time} overflows at t={fail} without emptying first"
                ))
            })?;
            (t, 0.0, SegmentEnd::Empty)
        }
    };

    // Levels from which the pinned end is still reachable.
    let len = end - start_time;
    let mut backward = vec![Interval::point(target); len + 1];
    for t in (start_time + 1..=end).rev() {
        let x = bracket.flows(p, t);
        let next = backward[t - start_time];
        let mut prev = Interval::new(next.lo - x.hi, next.hi - x.lo);
        if t - 1 > start_time {
            prev = intersect(prev, Interval::new(0.0, cap), tol.x).ok_or_else(|| {
                Error::InternalInvariantViolation(format!(
                    "no admissible level at t={} on the way to the pin at t={end}",
                    t - 1
                ))
            })?;
        }
        backward[t - 1 - start_time] = prev;
    }
    if !backward[0].contains(start_level, tol.x) {
        return Err(Error::InternalInvariantViolation(format!(
            "pin at t={end} unreachable from level {start_level} at t={start_time}"
        )));
    }

    let mut levels = Vec::with_capacity(len);
    let mut level = start_level;
    for t in start_time + 1..=end {
        let x = bracket.flows(p, t);
        let reach = Interval::new(level + x.lo, level + x.hi);
        let allowed = intersect(reach, backward[t - start_time], tol.x).ok_or_else(|| {
            Error::InternalInvariantViolation(format!(
                "forward and backward bands disjoint at t={t}"
            ))
        })?;
        level = allowed.nearest(level);
        levels.push(level);
    }

    let mu = certifying_mu(p, start_time, start_level, &levels, bracket, tol.x);
    Ok(Segment {
        start: start_time,
        end,
        end_kind,
        levels,
        mu,
        bracket,
    })
}

/// Picks one multiplier for the whole segment: a common subgradient of all
/// chosen flows when one exists inside the bracket, else the bracket middle.
fn certifying_mu(
    p: &Problem,
    start_time: usize,
    start_level: f64,
    levels: &[f64],
    bracket: MuBracket,
    tol_x: f64,
) -> f64 {
    let mut lo = f64::NEG_INFINITY;
    let mut hi = f64::INFINITY;
    let mut prev = start_level;
    for (i, &level) in levels.iter().enumerate() {
        let hull = p
            .cost(start_time + 1 + i)
            .subgradient_hull(level - prev, tol_x);
        lo = lo.max(hull.lo);
        hi = hi.min(hull.hi);
        prev = level;
    }
    let mid = bracket.mid();
    let a = lo.max(bracket.lo);
    let b = hi.min(bracket.hi);
    if a <= b {
        mid.clamp(a, b)
    } else {
        mid
    }
}

/// Intersection of two intervals, tolerating a gap of up to `tol` (which
/// collapses to the nearest point of `b`).
fn intersect(a: Interval, b: Interval, tol: f64) -> Option<Interval> {
    let lo = a.lo.max(b.lo);
    let hi = a.hi.min(b.hi);
    if lo <= hi {
        Some(Interval::new(lo, hi))
    } else if lo - hi <= tol {
        let x = b.nearest(0.5 * (lo + hi));
        Some(Interval::point(x))
    } else {
        None
    }
}
