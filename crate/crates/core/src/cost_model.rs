//! Per-period convex cost functions.
//!
//! A [`CostFunction`] gives the money cost `C(x)` of changing the store level
//! by `x` in one period (positive `x` buys, negative `x` sells). Rate limits
//! restrict the domain to `[-p_out, p_in]`; the cost is treated as `+inf`
//! outside it. Every family satisfies `C(0) = 0` and is convex on its domain.

use crate::error::{Error, Result};
use crate::tolerance::DEFAULT_TOL_X;

/// Closed interval `[lo, hi]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Interval {
    pub lo: f64,
    pub hi: f64,
}

impl Interval {
    pub const fn new(lo: f64, hi: f64) -> Self {
        Self { lo, hi }
    }

    pub const fn point(x: f64) -> Self {
        Self { lo: x, hi: x }
    }

    pub fn width(&self) -> f64 {
        self.hi - self.lo
    }

    pub fn contains(&self, x: f64, tol: f64) -> bool {
        x >= self.lo - tol && x <= self.hi + tol
    }

    /// Point of the interval nearest to `x`.
    pub fn nearest(&self, x: f64) -> f64 {
        x.max(self.lo).min(self.hi)
    }
}

/// Input and output rate limits, in energy units per period.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RateLimits {
    pub p_in: f64,
    pub p_out: f64,
}

impl RateLimits {
    pub fn new(p_in: f64, p_out: f64) -> Result<Self> {
        if !(p_in.is_finite() && p_out.is_finite()) || p_in < 0.0 || p_out < 0.0 {
            return Err(Error::InvalidCost(format!(
                "rate limits must be finite and non-negative (p_in={p_in}, p_out={p_out})"
            )));
        }
        if p_in == 0.0 && p_out == 0.0 {
            return Err(Error::InvalidCost(
                "at least one rate limit must be positive".into(),
            ));
        }
        Ok(Self { p_in, p_out })
    }

    pub fn symmetric(p: f64) -> Result<Self> {
        Self::new(p, p)
    }

    pub fn domain(&self) -> Interval {
        Interval::new(-self.p_out, self.p_in)
    }
}

/// Price-taker costs: buy at `buy` per unit, sell at `sell` per unit.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TwoPriceLinear {
    pub buy: f64,
    pub sell: f64,
}

/// One linear piece of a [`PiecewiseLinearConvex`] cost: starts at `x` and
/// has slope `slope` until the next breakpoint (or the domain end).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Breakpoint {
    pub x: f64,
    pub slope: f64,
}

/// General convex piecewise-linear cost, anchored so that `C(0) = 0`.
///
/// The first breakpoint sits at `-p_out`; slopes are nondecreasing.
#[derive(Debug, Clone, PartialEq)]
pub struct PiecewiseLinearConvex {
    breakpoints: Vec<Breakpoint>,
}

impl PiecewiseLinearConvex {
    pub fn breakpoints(&self) -> &[Breakpoint] {
        &self.breakpoints
    }

    fn piece_end(&self, j: usize, p_in: f64) -> f64 {
        self.breakpoints.get(j + 1).map_or(p_in, |b| b.x)
    }
}

/// Market-impact cost: `buy_price*x + buy_curvature*x^2` when buying and
/// `sell_price*x + sell_curvature*x^2` when selling (`x < 0`).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadraticImpact {
    pub buy_price: f64,
    pub sell_price: f64,
    pub buy_curvature: f64,
    pub sell_curvature: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub enum CostShape {
    TwoPriceLinear(TwoPriceLinear),
    PiecewiseLinear(PiecewiseLinearConvex),
    Quadratic(QuadraticImpact),
}

/// A convex cost of changing the store level in one period, restricted to
/// the rate-limited domain `[-p_out, p_in]`.
#[derive(Debug, Clone, PartialEq)]
pub struct CostFunction {
    shape: CostShape,
    rates: RateLimits,
}

impl CostFunction {
    pub fn two_price(buy: f64, sell: f64, rates: RateLimits) -> Result<Self> {
        Self::new(
            CostShape::TwoPriceLinear(TwoPriceLinear { buy, sell }),
            rates,
        )
    }

    /// Builds a piecewise-linear cost from `(x, slope-to-the-right)` pairs.
    pub fn piecewise(points: &[(f64, f64)], rates: RateLimits) -> Result<Self> {
        let breakpoints = points
            .iter()
            .map(|&(x, slope)| Breakpoint { x, slope })
            .collect();
        Self::new(
            CostShape::PiecewiseLinear(PiecewiseLinearConvex { breakpoints }),
            rates,
        )
    }

    pub fn quadratic(q: QuadraticImpact, rates: RateLimits) -> Result<Self> {
        Self::new(CostShape::Quadratic(q), rates)
    }

    pub fn new(shape: CostShape, rates: RateLimits) -> Result<Self> {
        let rates = RateLimits::new(rates.p_in, rates.p_out)?;
        validate_shape(&shape, &rates)?;
        Ok(Self { shape, rates })
    }

    pub fn shape(&self) -> &CostShape {
        &self.shape
    }

    pub fn rates(&self) -> RateLimits {
        self.rates
    }

    pub fn domain(&self) -> Interval {
        self.rates.domain()
    }

    /// `C(x)`, rejecting flows more than the default tolerance outside the
    /// domain.
    pub fn evaluate(&self, x: f64) -> Result<f64> {
        self.evaluate_within(x, DEFAULT_TOL_X)
    }

    pub fn evaluate_within(&self, x: f64, tol_x: f64) -> Result<f64> {
        let dom = self.domain();
        if !x.is_finite() || !dom.contains(x, tol_x) {
            return Err(Error::DomainViolation {
                x,
                lo: dom.lo,
                hi: dom.hi,
            });
        }
        Ok(self.value_at(dom.nearest(x)))
    }

    /// `C(x)` for `x` already inside the domain.
    pub(crate) fn value_at(&self, x: f64) -> f64 {
        if x == 0.0 {
            return 0.0;
        }
        match &self.shape {
            CostShape::TwoPriceLinear(c) => {
                if x > 0.0 {
                    c.buy * x
                } else {
                    c.sell * x
                }
            }
            CostShape::Quadratic(q) => {
                if x > 0.0 {
                    q.buy_price * x + q.buy_curvature * x * x
                } else {
                    q.sell_price * x + q.sell_curvature * x * x
                }
            }
            CostShape::PiecewiseLinear(pw) => {
                let (a, b) = if x > 0.0 { (0.0, x) } else { (x, 0.0) };
                let mut total = 0.0;
                for (j, bp) in pw.breakpoints.iter().enumerate() {
                    let lo = bp.x.max(a);
                    let hi = pw.piece_end(j, self.rates.p_in).min(b);
                    if hi > lo {
                        total += bp.slope * (hi - lo);
                    }
                }
                if x > 0.0 {
                    total
                } else {
                    -total
                }
            }
        }
    }

    /// The set of minimizers of `C(x) - mu*x` over the domain.
    ///
    /// Both endpoints are nondecreasing in `mu`. The interval is degenerate
    /// unless `mu` equals the slope of a linear piece.
    pub fn minimizer_interval(&self, mu: f64) -> Interval {
        let RateLimits { p_in, p_out } = self.rates;
        match &self.shape {
            CostShape::TwoPriceLinear(c) => {
                let lo = if p_out > 0.0 && mu <= c.sell {
                    -p_out
                } else if mu <= c.buy {
                    0.0
                } else {
                    p_in
                };
                let hi = if p_in > 0.0 && mu >= c.buy {
                    p_in
                } else if mu >= c.sell {
                    0.0
                } else {
                    -p_out
                };
                Interval::new(lo, hi)
            }
            CostShape::Quadratic(q) => {
                let lo = if mu <= q.sell_price {
                    if q.sell_curvature > 0.0 {
                        ((mu - q.sell_price) / (2.0 * q.sell_curvature)).max(-p_out)
                    } else {
                        -p_out
                    }
                } else if mu <= q.buy_price {
                    0.0
                } else if q.buy_curvature > 0.0 {
                    ((mu - q.buy_price) / (2.0 * q.buy_curvature)).min(p_in)
                } else {
                    p_in
                };
                let hi = if mu >= q.buy_price {
                    if q.buy_curvature > 0.0 {
                        ((mu - q.buy_price) / (2.0 * q.buy_curvature)).min(p_in)
                    } else {
                        p_in
                    }
                } else if mu >= q.sell_price {
                    0.0
                } else if q.sell_curvature > 0.0 {
                    ((mu - q.sell_price) / (2.0 * q.sell_curvature)).max(-p_out)
                } else {
                    -p_out
                };
                Interval::new(lo.min(hi), hi.max(lo))
            }
            CostShape::PiecewiseLinear(pw) => {
                let bps = &pw.breakpoints;
                let lo = bps.iter().find(|b| b.slope >= mu).map_or(p_in, |b| b.x);
                let hi = bps
                    .iter()
                    .rposition(|b| b.slope <= mu)
                    .map_or(-p_out, |j| pw.piece_end(j, p_in));
                Interval::new(lo, hi)
            }
        }
    }

    /// Left derivative `C'_-(x)`; `-inf` at (or below) the lower domain end.
    pub fn left_derivative(&self, x: f64) -> f64 {
        if x <= -self.rates.p_out {
            return f64::NEG_INFINITY;
        }
        match &self.shape {
            CostShape::TwoPriceLinear(c) => {
                if x > 0.0 {
                    c.buy
                } else {
                    c.sell
                }
            }
            CostShape::Quadratic(q) => {
                if x > 0.0 {
                    q.buy_price + 2.0 * q.buy_curvature * x
                } else {
                    q.sell_price + 2.0 * q.sell_curvature * x
                }
            }
            CostShape::PiecewiseLinear(pw) => {
                let j = pw.breakpoints.iter().rposition(|b| b.x < x).unwrap_or(0);
                pw.breakpoints[j].slope
            }
        }
    }

    /// Right derivative `C'_+(x)`; `+inf` at (or above) the upper domain end.
    pub fn right_derivative(&self, x: f64) -> f64 {
        if x >= self.rates.p_in {
            return f64::INFINITY;
        }
        match &self.shape {
            CostShape::TwoPriceLinear(c) => {
                if x >= 0.0 {
                    c.buy
                } else {
                    c.sell
                }
            }
            CostShape::Quadratic(q) => {
                if x >= 0.0 {
                    q.buy_price + 2.0 * q.buy_curvature * x
                } else {
                    q.sell_price + 2.0 * q.sell_curvature * x
                }
            }
            CostShape::PiecewiseLinear(pw) => {
                let j = pw.breakpoints.iter().rposition(|b| b.x <= x).unwrap_or(0);
                pw.breakpoints[j].slope
            }
        }
    }

    /// Every `mu` for which some flow within `tol` of `x` minimizes
    /// `C(y) - mu*y`: the hull of the subdifferentials over `[x-tol, x+tol]`.
    pub fn subgradient_hull(&self, x: f64, tol: f64) -> Interval {
        let dom = self.domain();
        let a = (x - tol).max(dom.lo);
        let b = (x + tol).min(dom.hi);
        Interval::new(self.left_derivative(a), self.right_derivative(b))
    }

    /// Smallest and largest finite marginal prices over the domain.
    ///
    /// Any `mu` strictly below the first makes `-p_out` the unique minimizer;
    /// any `mu` strictly above the second makes `p_in` the unique minimizer.
    pub fn slope_bounds(&self) -> (f64, f64) {
        let RateLimits { p_in, p_out } = self.rates;
        match &self.shape {
            CostShape::TwoPriceLinear(c) => (
                if p_out > 0.0 { c.sell } else { c.buy },
                if p_in > 0.0 { c.buy } else { c.sell },
            ),
            CostShape::Quadratic(q) => (
                if p_out > 0.0 {
                    q.sell_price - 2.0 * q.sell_curvature * p_out
                } else {
                    q.buy_price
                },
                if p_in > 0.0 {
                    q.buy_price + 2.0 * q.buy_curvature * p_in
                } else {
                    q.sell_price
                },
            ),
            CostShape::PiecewiseLinear(pw) => (
                pw.breakpoints[0].slope,
                pw.breakpoints[pw.breakpoints.len() - 1].slope,
            ),
        }
    }

    /// Marginal price of the first unit bought (`C'_+(0)`, ignoring rates).
    pub fn marginal_buy_price(&self) -> f64 {
        match &self.shape {
            CostShape::TwoPriceLinear(c) => c.buy,
            CostShape::Quadratic(q) => q.buy_price,
            CostShape::PiecewiseLinear(pw) => {
                let j = pw.breakpoints.iter().rposition(|b| b.x <= 0.0).unwrap_or(0);
                pw.breakpoints[j].slope
            }
        }
    }

    /// Marginal revenue of the first unit sold (`C'_-(0)`, ignoring rates).
    pub fn marginal_sell_price(&self) -> f64 {
        match &self.shape {
            CostShape::TwoPriceLinear(c) => c.sell,
            CostShape::Quadratic(q) => q.sell_price,
            CostShape::PiecewiseLinear(pw) => {
                let j = pw.breakpoints.iter().rposition(|b| b.x < 0.0).unwrap_or(0);
                pw.breakpoints[j].slope
            }
        }
    }

    /// Folds a round-trip efficiency `eta` into the cost by scaling the sell
    /// side by `eta`, so stored quantities stay in as-stored units.
    pub fn apply_efficiency(&self, eta: f64) -> Result<Self> {
        if !(eta > 0.0 && eta <= 1.0) {
            return Err(Error::InvalidEfficiency(eta));
        }
        if eta == 1.0 {
            return Ok(self.clone());
        }
        let shape = match &self.shape {
            CostShape::TwoPriceLinear(c) => CostShape::TwoPriceLinear(TwoPriceLinear {
                buy: c.buy,
                sell: c.sell * eta,
            }),
            CostShape::Quadratic(q) => CostShape::Quadratic(QuadraticImpact {
                sell_price: q.sell_price * eta,
                sell_curvature: q.sell_curvature * eta,
                ..*q
            }),
            CostShape::PiecewiseLinear(pw) => {
                let mut out = Vec::with_capacity(pw.breakpoints.len() + 1);
                for (j, bp) in pw.breakpoints.iter().enumerate() {
                    let end = pw.piece_end(j, self.rates.p_in);
                    if bp.x < 0.0 && end > 0.0 {
                        // piece straddles zero: split it
                        out.push(Breakpoint {
                            x: bp.x,
                            slope: bp.slope * eta,
                        });
                        out.push(Breakpoint {
                            x: 0.0,
                            slope: bp.slope,
                        });
                    } else if bp.x < 0.0 {
                        out.push(Breakpoint {
                            x: bp.x,
                            slope: bp.slope * eta,
                        });
                    } else {
                        out.push(*bp);
                    }
                }
                CostShape::PiecewiseLinear(PiecewiseLinearConvex { breakpoints: out })
            }
        };
        Self::new(shape, self.rates)
    }

    /// The same cost with the flow axis stretched by `k`: `C_k(x) = k*C(x/k)`.
    ///
    /// Marginal prices are unchanged while rates scale by `k`.
    pub fn scaled(&self, k: f64) -> Result<Self> {
        if !(k > 0.0 && k.is_finite()) {
            return Err(Error::InvalidCost(format!(
                "scale factor must be positive, got {k}"
            )));
        }
        let rates = RateLimits::new(self.rates.p_in * k, self.rates.p_out * k)?;
        let shape = match &self.shape {
            CostShape::TwoPriceLinear(c) => CostShape::TwoPriceLinear(*c),
            CostShape::Quadratic(q) => CostShape::Quadratic(QuadraticImpact {
                buy_curvature: q.buy_curvature / k,
                sell_curvature: q.sell_curvature / k,
                ..*q
            }),
            CostShape::PiecewiseLinear(pw) => CostShape::PiecewiseLinear(PiecewiseLinearConvex {
                breakpoints: pw
                    .breakpoints
                    .iter()
                    .map(|b| Breakpoint {
                        x: b.x * k,
                        slope: b.slope,
                    })
                    .collect(),
            }),
        };
        Self::new(shape, rates)
    }
}

fn validate_shape(shape: &CostShape, rates: &RateLimits) -> Result<()> {
    let finite = |v: f64, what: &str| {
        if v.is_finite() {
            Ok(())
        } else {
            Err(Error::InvalidCost(format!(
                "{what} must be finite, got {v}"
            )))
        }
    };
    match shape {
        CostShape::TwoPriceLinear(c) => {
            finite(c.buy, "buy price")?;
            finite(c.sell, "sell price")?;
            if c.buy < c.sell {
                return Err(Error::InvalidCost(format!(
                    "buy price {} is below sell price {}",
                    c.buy, c.sell
                )));
            }
        }
        CostShape::Quadratic(q) => {
            finite(q.buy_price, "buy price")?;
            finite(q.sell_price, "sell price")?;
            finite(q.buy_curvature, "buy curvature")?;
            finite(q.sell_curvature, "sell curvature")?;
            if q.buy_price < q.sell_price {
                return Err(Error::InvalidCost(format!(
                    "buy price {} is below sell price {}",
                    q.buy_price, q.sell_price
                )));
            }
            if q.buy_curvature < 0.0 || q.sell_curvature < 0.0 {
                return Err(Error::InvalidCost("curvatures must be non-negative".into()));
            }
        }
        CostShape::PiecewiseLinear(pw) => {
            let bps = &pw.breakpoints;
            let Some(first) = bps.first() else {
                return Err(Error::InvalidCost(
                    "piecewise cost needs at least one piece".into(),
                ));
            };
            if first.x != -rates.p_out {
                return Err(Error::InvalidCost(format!(
                    "first breakpoint must sit at -p_out = {}, got {}",
                    -rates.p_out, first.x
                )));
            }
            for b in bps {
                finite(b.x, "breakpoint")?;
                finite(b.slope, "slope")?;
            }
            for w in bps.windows(2) {
                if w[1].x <= w[0].x {
                    return Err(Error::InvalidCost(
                        "breakpoints must be strictly increasing".into(),
                    ));
                }
                if w[1].slope < w[0].slope {
                    return Err(Error::InvalidCost(format!(
                        "slopes must be nondecreasing ({} then {})",
                        w[0].slope, w[1].slope
                    )));
                }
            }
            if bps[bps.len() - 1].x >= rates.p_in {
                return Err(Error::InvalidCost(format!(
                    "last breakpoint {} must lie below p_in = {}",
                    bps[bps.len() - 1].x,
                    rates.p_in
                )));
            }
        }
    }
    Ok(())
}
