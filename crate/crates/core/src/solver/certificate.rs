use super::search::SegmentEnd;
use super::{feasibility_violations, Problem, Schedule, Solution};
use crate::cost_model::CostShape;
use crate::tolerance::Tolerances;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PinKind {
    Full,
    Empty,
}

/// Per-period multipliers plus the segment structure that produced them.
///
/// `boundaries` runs `0 = T_0 < T_1 < ... < T_k = T`; `mu` is constant on
/// each `(T_i, T_{i+1}]`, and `pin_kinds[i]` records whether the store was
/// full or empty at the interior boundary `T_{i+1}`.
#[derive(Debug, Clone, PartialEq)]
pub struct MuCertificate {
    pub mu: Vec<f64>,
    pub boundaries: Vec<usize>,
    pub pin_kinds: Vec<PinKind>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SegmentInfo {
    pub start: usize,
    pub end: usize,
    pub mu: f64,
    pub end_kind: SegmentEnd,
}

impl SegmentInfo {
    pub fn len(&self) -> usize {
        self.end - self.start
    }

    pub fn is_empty(&self) -> bool {
        self.end == self.start
    }
}

impl MuCertificate {
    pub fn num_segments(&self) -> usize {
        self.boundaries.len().saturating_sub(1)
    }

    pub fn segments(&self) -> impl Iterator<Item = SegmentInfo> + '_ {
        let last = self.num_segments().saturating_sub(1);
        self.boundaries
            .windows(2)
            .enumerate()
            .map(move |(i, w)| SegmentInfo {
                start: w[0],
                end: w[1],
                mu: self.mu[w[1] - 1],
                end_kind: if i == last {
                    SegmentEnd::Terminal
                } else {
                    match self.pin_kinds[i] {
                        PinKind::Full => SegmentEnd::Full,
                        PinKind::Empty => SegmentEnd::Empty,
                    }
                },
            })
    }

    /// Longest and mean segment length.
    pub fn horizon_stats(&self) -> (usize, f64) {
        let lens: Vec<usize> = self.segments().map(|s| s.len()).collect();
        let max = lens.iter().copied().max().unwrap_or(0);
        let mean = if lens.is_empty() {
            0.0
        } else {
            lens.iter().sum::<usize>() as f64 / lens.len() as f64
        };
        (max, mean)
    }
}

/// Outcome of checking a schedule/multiplier pair against the three
/// sufficient optimality conditions.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct CertificateReport {
    /// (i) the schedule is feasible.
    pub feasible: bool,
    /// (ii) each flow minimizes `C_t(x) - mu_t*x`.
    pub pointwise_min: bool,
    /// (iii) `mu` only moves across full (up) or empty (down) levels.
    pub comp_slack: bool,
    pub details: Vec<String>,
}

impl CertificateReport {
    pub fn is_certified(&self) -> bool {
        self.feasible && self.pointwise_min && self.comp_slack
    }

    /// Labels of the failed conditions, e.g. `["(ii)"]`.
    pub fn failed_conditions(&self) -> Vec<&'static str> {
        let mut out = Vec::new();
        if !self.feasible {
            out.push("(i)");
        }
        if !self.pointwise_min {
            out.push("(ii)");
        }
        if !self.comp_slack {
            out.push("(iii)");
        }
        out
    }
}

/// Checks whether `(s, c)` satisfies the optimality conditions for `p`.
///
/// Never fails: malformed inputs are reported as failed conditions. The
/// pointwise check allows the slack a multiplier error of `tol_mu` and a flow
/// error of `tol_x` can produce in a reduced cost, on top of `tol_cost`.
pub fn verify_certificate(
    p: &Problem,
    s: &Schedule,
    c: &MuCertificate,
    tol: &Tolerances,
) -> CertificateReport {
    let horizon = p.horizon();
    let tol_mu = tol.mu_for(p);
    let mut report = CertificateReport::default();

    let violations = feasibility_violations(p, s, tol);
    report.feasible = violations.is_empty();
    report
        .details
        .extend(violations.into_iter().map(|v| format!("(i) {v}")));
    if s.levels.len() != horizon + 1 || s.flows.len() != horizon || c.mu.len() != horizon {
        report.details.push(format!(
            "(ii) expected {horizon} multipliers, got {}",
            c.mu.len()
        ));
        return report;
    }

    report.pointwise_min = true;
    for t in 1..=horizon {
        let cost = p.cost(t);
        let mu = c.mu[t - 1];
        let x = s.flows[t - 1];
        if !mu.is_finite() {
            report.pointwise_min = false;
            report
                .details
                .push(format!("(ii) period {t}: multiplier {mu} is not finite"));
            continue;
        }
        let Ok(value) = cost.evaluate_within(x, tol.x) else {
            report.pointwise_min = false;
            report
                .details
                .push(format!("(ii) period {t}: flow {x} outside the cost domain"));
            continue;
        };
        let best_x = cost.minimizer_interval(mu).lo;
        let best = cost.value_at(best_x) - mu * best_x;
        let reduced = value - mu * x;
        let rates = cost.rates();
        let (slope_lo, slope_hi) = cost.slope_bounds();
        let slack = tol.cost
            + tol_mu * (rates.p_in + rates.p_out)
            + tol.x * (slope_lo.abs().max(slope_hi.abs()) + mu.abs());
        if reduced > best + slack {
            report.pointwise_min = false;
            report.details.push(format!(
                "(ii) period {t}: flow {x} has reduced cost {reduced} > minimum {best} at mu = {mu}"
            ));
        }
    }

    report.comp_slack = true;
    for t in 1..horizon {
        let level = s.levels[t];
        let (now, next) = (c.mu[t - 1], c.mu[t]);
        let empty = level <= tol.x;
        let full = level >= p.capacity() - tol.x;
        let ok = match (empty, full) {
            (true, true) => true,
            (true, false) => next <= now + tol_mu,
            (false, true) => next >= now - tol_mu,
            (false, false) => (next - now).abs() <= tol_mu,
        };
        if !ok {
            report.comp_slack = false;
            report.details.push(format!(
                "(iii) time {t}: level {level} but mu moves from {now} to {next}"
            ));
        }
    }
    report
}

/// Periods of two-price linear cost that break the threshold rule: buy at
/// the largest feasible rate when `mu` exceeds the buy price, sell at the
/// largest feasible rate when `mu` is below the sell price, hold otherwise.
pub fn bang_bang_violations(p: &Problem, sol: &Solution, tol: &Tolerances) -> Vec<usize> {
    let tol_mu = tol.mu_for(p);
    let s = &sol.schedule;
    let horizon = p.horizon();
    (1..=horizon)
        .filter(|&t| {
            let CostShape::TwoPriceLinear(prices) = p.cost(t).shape() else {
                return false;
            };
            let rates = p.cost(t).rates();
            let mu = sol.certificate.mu[t - 1];
            let x = s.flows[t - 1];
            let prev = s.levels[t - 1];
            let (room_up, room_down) = if t == horizon {
                (p.end_level() - prev, prev - p.end_level())
            } else {
                (p.capacity() - prev, prev)
            };
            if mu > prices.buy + tol_mu {
                x < rates.p_in.min(room_up) - tol.x
            } else if mu < prices.sell - tol_mu {
                -x < rates.p_out.min(room_down) - tol.x
            } else if mu > prices.sell + tol_mu && mu < prices.buy - tol_mu {
                x.abs() > tol.x
            } else {
                false
            }
        })
        .collect()
}
