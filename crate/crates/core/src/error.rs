use thiserror::Error;

use crate::zf::frg::ZfSolution;

pub type Result<T, E = FlatPrecError> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum FlatPrecError {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("matrix is rank deficient: {0}")]
    RankDeficient(String),

    #[error("infeasible power budget: {0}")]
    InfeasibleBudget(String),

    #[error("numerical breakdown: {0}")]
    NumericalBreakdown(String),

    #[error("invalid dual point: mu + lambda_n - theta_n = {value:e} < 0 at antenna {antenna}")]
    InvalidDualPoint { antenna: usize, value: f64 },

    /// The lower per-antenna bound is violated at termination. The best
    /// iterate found is attached so callers can still inspect it.
    #[error(
        "no feasible zero-forcing point: max lower-bound violation {max_lb_violation:e} W, flatness bound rho = {rho:e}"
    )]
    NoFeasiblePoint {
        max_lb_violation: f64,
        rho: f64,
        best: Box<ZfSolution>,
    },

    #[error("PA output {p_out_db:.3} dBW exceeds saturation {p_sat_db:.3} dBW")]
    SaturationExceeded { p_out_db: f64, p_sat_db: f64 },

    #[error("row {row} has zero power but a positive target")]
    ZeroRow { row: usize },

    #[error("config error: {0}")]
    Config(String),

    #[error("parse error: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}
