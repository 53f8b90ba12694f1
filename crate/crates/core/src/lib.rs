//! Optimal scheduling of a finite store that buys and sells against a price
//! series, with a multiplier certificate that proves each schedule optimal.
//!
//! The core entry point is [`solver::solve`]. [`oracle`] holds an independent
//! grid dynamic program used to cross-check results, and [`dataio`] reads
//! price files and writes schedules.

pub mod cli;
pub mod cost_model;
pub mod dataio;
pub mod error;
pub mod oracle;
pub mod solver;
pub mod tolerance;

pub use cost_model::{CostFunction, Interval, RateLimits};
pub use error::{Error, Result};
pub use solver::{solve, solve_with, MuCertificate, Problem, Schedule, Solution};
pub use tolerance::Tolerances;
