use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("non-finite value from {what} at ({x}, {y})")]
    NonFiniteValue { what: &'static str, x: f64, y: f64 },

    #[error("unknown problem `{0}` (expected one of: paper, constant-force, no-layer, zero)")]
    UnknownProblem(String),

    #[error("function is not zero-mean: integral = {mean:e}")]
    NotZeroMean { mean: f64 },

    #[error("integral condition violated at y = {y}: F1(1, y) = {value:e}")]
    IntegralConditionViolated { y: f64, value: f64 },

    #[error("order {order} needs y-derivatives of f up to {needed}, only {supplied} supplied")]
    MissingDerivatives {
        order: usize,
        needed: usize,
        supplied: usize,
    },

    #[error("no convergence after {iterations} iterations (relative residual {residual:e})")]
    NoConvergence { iterations: usize, residual: f64 },

    #[error("grid mismatch: {0}")]
    GridMismatch(String),

    #[error("need at least 3 points for a fit, got {0}")]
    InsufficientPoints(usize),

    #[error("non-positive norm {0:e} cannot be fitted on a log scale")]
    NonPositiveNorm(f64),

    #[error("start point y0 = {0} lies on an absorbing boundary")]
    DegenerateStart(f64),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// Failures of the numerics, as opposed to bad input.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::NonFiniteValue { .. }
                | Error::NotZeroMean { .. }
                | Error::IntegralConditionViolated { .. }
                | Error::NoConvergence { .. }
                | Error::NonPositiveNorm(_)
        )
    }
}

pub(crate) fn check_finite(v: f64, what: &'static str, x: f64, y: f64) -> Result<f64> {
    if v.is_finite() {
        Ok(v)
    } else {
        Err(Error::NonFiniteValue { what, x, y })
    }
}
