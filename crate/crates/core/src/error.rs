use thiserror::Error;

/// Errors raised while building operators, iterating them, or checking estimates.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("point {x} lies outside [{lo}, {hi}]")]
    OutOfDomain { x: f64, lo: f64, hi: f64 },

    #[error("grids do not match: {0}")]
    GridMismatch(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("cannot parse `{input}` at position {position}: {reason}")]
    Parse {
        input: String,
        position: usize,
        reason: String,
    },

    #[error("invalid operator: {0}")]
    InvalidOperator(String),

    #[error("MKZ tail weight {tail:.3e} at x = {x_max} still exceeds {tail_tol:.3e} with K_max = {k_max}")]
    TruncationExceeded {
        tail: f64,
        tail_tol: f64,
        x_max: f64,
        k_max: usize,
    },

    #[error("iterates did not converge within m_max = {m_max} (last residual {residual:.3e}, tol {tol:.3e})")]
    NotConverged { residual: f64, tol: f64, m_max: u64 },

    #[error("hypothesis `{condition}` fails for {estimate}")]
    Hypothesis {
        estimate: &'static str,
        condition: String,
    },

    #[error("no estimate applies: {0}")]
    NoApplicableEstimate(String),

    #[error("io: {0}")]
    Io(String),
}

pub type Result<T> = std::result::Result<T, Error>;
