use thiserror::Error;

/// Quantity that made the parameter assumption (`K > 0`, `A_1 > 0`) fail.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Offending {
    Floor,
    LeadingCoefficient,
}

impl std::fmt::Display for Offending {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Offending::Floor => f.write_str("K"),
            Offending::LeadingCoefficient => f.write_str("A_1"),
        }
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid parameter {name} = {value}: {reason}")]
    InvalidParameter {
        name: &'static str,
        value: f64,
        reason: &'static str,
    },

    #[error("degenerate market: |mu - r| = {gap:e} leaves no market price of risk")]
    DegenerateMarket { gap: f64 },

    #[error("assumption violated: {quantity} = {value} (need K > 0 and A_1 > 0)")]
    AssumptionViolated { quantity: Offending, value: f64 },

    #[error("unsupported utility family for {0}")]
    UnsupportedFamily(&'static str),

    #[error("{what} outside its domain: {value}")]
    Domain { what: &'static str, value: f64 },

    #[error("no sign change on [{lo}, {hi}]")]
    NoSignChange { lo: f64, hi: f64 },

    #[error("root finder exceeded {0} iterations")]
    MaxIterExceeded(usize),

    #[error("no bracket found for {0} within |z| <= 50")]
    BracketFailure(&'static str),

    #[error("adaptive quadrature on [{a}, {b}] did not reach tolerance {tol:e}")]
    TolNotReached { a: f64, b: f64, tol: f64 },

    #[error("decade scan for the dual root left [1e-12, 1e12] (last y = {last:e})")]
    ScanFailure { last: f64 },

    #[error("closed form and root finder disagree for {what}: {closed} vs {root}")]
    ClosedFormMismatch { what: &'static str, closed: f64, root: f64 },

    #[error("risk-neutral probability {p} outside (0, 1); use more tree steps")]
    ProbabilityOutOfRange { p: f64 },

    #[error("PSOR did not converge at time step {step} after {iterations} sweeps")]
    PsorNotConverged { step: usize, iterations: usize },

    #[error("invalid configuration: {0}")]
    Config(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    /// Process exit code used by the command-line front end.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::AssumptionViolated { .. } => 2,
            Error::InvalidParameter { .. }
            | Error::DegenerateMarket { .. }
            | Error::UnsupportedFamily(_)
            | Error::Domain { .. }
            | Error::Config(_) => 1,
            _ => 3,
        }
    }
}
