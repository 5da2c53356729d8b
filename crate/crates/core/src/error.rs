use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    /// An argument lies outside the domain where a function is defined or
    /// where its evaluation is reliable.
    #[error("domain error in {func}: {msg}")]
    Domain { func: &'static str, msg: String },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("shape mismatch: expected {expected} values, got {got}")]
    Shape { expected: usize, got: usize },

    #[error("{what} did not converge after {iterations} iterations (residual {residual:e}, tol {tol:e})")]
    NotConverged {
        what: &'static str,
        iterations: usize,
        residual: f64,
        tol: f64,
    },

    #[error("time step to level {level} failed: {source}")]
    StepFailed {
        level: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("uniform bound violated at level {level}: sup |U| = {sup:e} > bound {bound:e}")]
    BoundViolated { level: usize, sup: f64, bound: f64 },

    #[error("time {t} outside the computed range [0, {max}]")]
    OutOfRange { t: f64, max: f64 },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn domain(func: &'static str, msg: impl Into<String>) -> Self {
        Error::Domain {
            func,
            msg: msg.into(),
        }
    }
}
