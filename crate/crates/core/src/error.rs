use thiserror::Error;

/// Errors raised across the library.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum EccmError {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error(
        "Riccati iteration did not converge after {iterations} iterations (residual {residual:e})"
    )]
    NoConvergence { iterations: usize, residual: f64 },

    #[error("innovation covariance is singular (smallest eigenvalue {min_eigenvalue:e})")]
    SingularInnovation { min_eigenvalue: f64 },

    #[error("jamming level {level} cannot be incentivized")]
    Infeasible { level: usize },

    #[error("optimizer stopped after {newton_steps} Newton steps without certifying optimality (KKT residual {kkt_residual:e})")]
    MaxIterations {
        newton_steps: usize,
        kkt_residual: f64,
    },

    #[error("solution for level {level} violates incentive compatibility: level {preferred} gives the jammer {excess:e} more utility")]
    IncentiveViolation {
        level: usize,
        preferred: usize,
        excess: f64,
    },

    #[error(
        "likelihood P[{level}][{observation}] is zero; stationarity checked in pre-division form"
    )]
    DegenerateLikelihood { level: usize, observation: usize },

    #[error("no jamming level could be incentivized; the solver failed on every level")]
    NoIncentivizableLevel,

    #[error("configuration error: {0}")]
    Config(String),

    #[error("I/O error: {0}")]
    Io(String),
}

impl From<std::io::Error> for EccmError {
    fn from(e: std::io::Error) -> Self {
        EccmError::Io(e.to_string())
    }
}

pub type Result<T, E = EccmError> = std::result::Result<T, E>;

pub(crate) fn invalid(msg: impl Into<String>) -> EccmError {
    EccmError::InvalidArgument(msg.into())
}
