use thiserror::Error;

/// Errors produced by the analytical solvers, the oracle and the simulators.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid instance: {0}")]
    InvalidInstance(String),

    #[error("invalid rate `{name}` = {value}: must be finite and within [0, {max}]")]
    InvalidRate {
        name: &'static str,
        value: f64,
        max: f64,
    },

    #[error("degenerate rates: s = c = 0 leaves the joint chain undefined")]
    DegenerateRates,

    #[error("dual variable must be positive, got {0}")]
    NonPositiveTheta(f64),

    #[error("residual budget must be positive, got {0}")]
    InfeasibleResidual(f64),

    #[error("bisection did not converge after {iterations} iterations (residual {residual:e})")]
    BisectionDiverged { iterations: usize, residual: f64 },

    #[error("problem too large: {0}")]
    TooLarge(String),

    #[error("horizon must be positive and finite, got {0}")]
    NonPositiveHorizon(f64),

    #[error("invalid heterogeneity profile: {0}")]
    InvalidProfile(String),
}

impl Error {
    /// True for failures of the numerical machinery itself rather than of the inputs.
    pub fn is_numerical(&self) -> bool {
        matches!(self, Error::BisectionDiverged { .. })
    }
}

pub type Result<T> = std::result::Result<T, Error>;
