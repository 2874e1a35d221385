use thiserror::Error;

/// Errors raised by the numerical pipeline.
///
/// Variants are grouped so a front end can map them onto distinct exit
/// statuses: malformed input, budget exhaustion, hypothesis refusals and
/// numeric failures.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("parse error: {0}")]
    Parse(String),

    #[error("invalid map: {0}")]
    InvalidMap(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("root solver did not converge after {sweeps} sweeps (max residual {max_residual:e})")]
    SolverFailure { sweeps: usize, max_residual: f64 },

    #[error("preimage residual {residual:e} exceeds tolerance {tolerance:e}")]
    Residual { residual: f64, tolerance: f64 },

    #[error("preimage budget exceeded: {required} points needed, budget is {budget}; use sampled mode")]
    Budget { required: u128, budget: u64 },

    #[error("branch continuation failed at path index {index}: {reason}")]
    ContinuationFailure { index: usize, reason: String },

    #[error("observable is singular at atom {index} ({point})")]
    SingularObservable { index: usize, point: String },

    #[error("potential pole hit at atom {index} ({point})")]
    PotentialPole { index: usize, point: String },

    #[error("quadrature tolerance {requested:e} not reached (achieved {achieved:e})")]
    Quadrature { requested: f64, achieved: f64 },

    #[error("reference measure mismatch: {0}")]
    ReferenceMismatch(String),

    #[error("hypothesis violated: {0}")]
    Refused(String),

    #[error("not enough data: {0}")]
    TooFewPoints(String),

    #[error("numerical failure: {0}")]
    Numeric(String),
}

impl Error {
    /// True for errors that stem from a theorem hypothesis gate.
    pub fn is_refusal(&self) -> bool {
        matches!(self, Error::Refused(_) | Error::ReferenceMismatch(_))
    }
}

pub type Result<T> = std::result::Result<T, Error>;
