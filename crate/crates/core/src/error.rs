use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("flow {x} lies outside the admissible range [{lo}, {hi}]")]
    DomainViolation { x: f64, lo: f64, hi: f64 },

    #[error("efficiency must lie in (0, 1], got {0}")]
    InvalidEfficiency(f64),

    #[error("invalid cost function: {0}")]
    InvalidCost(String),

    #[error("invalid problem: {0}")]
    InvalidProblem(String),

    #[error("schedule is infeasible: {0}")]
    InfeasibleSchedule(String),

    #[error("problem is infeasible: {0}")]
    InfeasibleProblem(String),

    #[error("internal invariant violated: {0}")]
    InternalInvariantViolation(String),

    #[error("no grid path reaches the snapped end level {end_level}")]
    GridInfeasible { end_level: f64 },

    #[error("enumeration would visit {paths} paths (limit {limit})")]
    TooLarge { paths: u128, limit: u128 },

    #[error("parse error on line {line}: {msg}")]
    Parse { line: u64, msg: String },

    #[error("validation error{}: {msg}", line.map(|l| format!(" on line {l}")).unwrap_or_default())]
    Validation { line: Option<u64>, msg: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
