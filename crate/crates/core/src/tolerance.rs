use crate::solver::Problem;

/// Absolute tolerance on energy quantities (levels and flows).
pub const DEFAULT_TOL_X: f64 = 1e-9;
/// Absolute tolerance on money quantities.
pub const DEFAULT_TOL_COST: f64 = 1e-9;
/// The multiplier search stops once its bracket is narrower than this
/// fraction of the problem's price range (floored at one money unit).
pub const DEFAULT_REL_TOL_MU: f64 = 1e-7;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Tolerances {
    pub x: f64,
    pub cost: f64,
    /// Absolute multiplier tolerance; `None` derives it from the problem.
    pub mu: Option<f64>,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self {
            x: DEFAULT_TOL_X,
            cost: DEFAULT_TOL_COST,
            mu: None,
        }
    }
}

impl Tolerances {
    pub fn mu_for(&self, p: &Problem) -> f64 {
        self.mu.unwrap_or_else(|| {
            let (lo, hi) = p.slope_bounds();
            DEFAULT_REL_TOL_MU * (hi - lo).max(1.0)
        })
    }

    /// Same tolerances with the multiplier tolerance pinned to `mu`.
    pub fn with_mu(self, mu: f64) -> Self {
        Self {
            mu: Some(mu),
            ..self
        }
    }
}
