use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, Error, PartialEq)]
pub enum Error {
    #[error("point {point:?} lies outside the domain")]
    OutsideDomain { point: Vec<f64> },

    #[error("not an immersion here: Jacobian is rank deficient at {point:?}")]
    NotImmersion { point: Vec<f64> },

    #[error("induced metric is not positive definite at {point:?}")]
    SingularMetric { point: Vec<f64> },

    #[error("tangent vectors span a degenerate plane")]
    DegeneratePlane,

    #[error("singular point {point:?}: {reason}")]
    SingularPoint { point: Vec<f64>, reason: String },

    #[error("curve speed vanishes at parameter {at}")]
    VanishingSpeed { at: f64 },

    #[error("price component {index} is not positive at t = {t}")]
    PositivityViolation { t: f64, index: usize },

    #[error("no convergence after {iterations} iterations (best residual {residual:e})")]
    NoConvergence { iterations: usize, residual: f64 },

    #[error("Newton iteration failed at t = {t}: {reason} (last iterate {last:?})")]
    NewtonFailed { t: f64, reason: String, last: Vec<f64> },

    #[error("unsupported: {0}")]
    Unsupported(String),

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("{message} at offset {offset}")]
    Parse { offset: usize, message: String },
}

impl Error {
    pub fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidInput(msg.into())
    }
}
