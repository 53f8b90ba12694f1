use super::Problem;
use crate::cost_model::Interval;
use crate::tolerance::Tolerances;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Side {
    Under,
    Over,
}

/// How the trajectories induced by a multiplier first leave the feasible
/// region, if they do.
///
/// `Under(t)`: at time `t` every induced level is below zero (or, at the
/// horizon, below the end level). `Over(t)` is the mirror image.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Classification {
    Feasible,
    Under(usize),
    Over(usize),
}

impl Classification {
    pub fn is_under(&self) -> bool {
        matches!(self, Self::Under(_))
    }

    pub fn is_over(&self) -> bool {
        matches!(self, Self::Over(_))
    }

    pub fn violation(&self) -> Option<(usize, Side)> {
        match *self {
            Self::Feasible => None,
            Self::Under(t) => Some((t, Side::Under)),
            Self::Over(t) => Some((t, Side::Over)),
        }
    }
}

/// Levels reachable from a fixed start when every flow is a minimizer for a
/// fixed multiplier.
///
/// `bands[i]` is the interval at time `start_time + i`, clipped to
/// `[0, E]` at interior times. Recording stops before the first violation.
#[derive(Debug, Clone, PartialEq)]
pub struct ReachBand {
    pub start_time: usize,
    pub bands: Vec<Interval>,
    pub first_violation: Option<(usize, Side)>,
}

impl ReachBand {
    pub fn at(&self, t: usize) -> Option<Interval> {
        t.checked_sub(self.start_time)
            .and_then(|i| self.bands.get(i).copied())
    }
}

/// Classifies `mu` by propagating the band of levels reachable from
/// `(start_time, start_level)` under the minimizer intervals of `mu`.
pub fn classify_mu(
    p: &Problem,
    start_time: usize,
    start_level: f64,
    mu: f64,
    tol: &Tolerances,
) -> (Classification, ReachBand) {
    let mut bands = Vec::new();
    let class = propagate(
        p,
        start_time,
        start_level,
        tol.x,
        |t| p.cost(t).minimizer_interval(mu),
        Some(&mut bands),
    );
    let band = ReachBand {
        start_time,
        bands,
        first_violation: class.violation(),
    };
    (class, band)
}

/// Classification alone, without recording the band.
pub(crate) fn classify_only(
    p: &Problem,
    start_time: usize,
    start_level: f64,
    mu: f64,
    tol_x: f64,
) -> Classification {
    propagate(
        p,
        start_time,
        start_level,
        tol_x,
        |t| p.cost(t).minimizer_interval(mu),
        None,
    )
}

/// Forward interval propagation shared by the point and bracket variants.
pub(crate) fn propagate<F>(
    p: &Problem,
    start_time: usize,
    start_level: f64,
    tol_x: f64,
    mut flows: F,
    mut record: Option<&mut Vec<Interval>>,
) -> Classification
where
    F: FnMut(usize) -> Interval,
{
    let horizon = p.horizon();
    let cap = p.capacity();
    let mut band = Interval::point(start_level);
    if let Some(r) = record.as_deref_mut() {
        r.push(band);
    }
    for t in start_time + 1..=horizon {
        let x = flows(t);
        let lo = band.lo + x.lo;
        let hi = band.hi + x.hi;
        if t == horizon {
            let target = p.end_level();
            if hi < target - tol_x {
                return Classification::Under(t);
            }
            if lo > target + tol_x {
                return Classification::Over(t);
            }
            band = Interval::new(lo, hi);
        } else {
            if hi < -tol_x {
                return Classification::Under(t);
            }
            if lo > cap + tol_x {
                return Classification::Over(t);
            }
            band = Interval::new(lo.clamp(0.0, cap), hi.clamp(0.0, cap));
        }
        if let Some(r) = record.as_deref_mut() {
            r.push(band);
        }
    }
    Classification::Feasible
}
