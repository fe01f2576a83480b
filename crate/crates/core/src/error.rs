use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    /// Construction or usage violated a structural precondition.
    #[error("invalid input: {0}")]
    Invalid(String),

    #[error("infeasible set: {0}")]
    InfeasibleSet(String),

    /// An iterative routine failed to reach its tolerance.
    #[error("numerical failure in {context}: residual {residual:.3e} after {iterations} iterations")]
    Numerical {
        context: &'static str,
        residual: f64,
        iterations: usize,
    },

    /// The feedback protocol was violated (query before commit, wrong round, ...).
    #[error("protocol violation: {0}")]
    Protocol(String),

    #[error("degenerate input: {0}")]
    Degenerate(String),
}

impl Error {
    pub fn invalid(msg: impl Into<String>) -> Self {
        Error::Invalid(msg.into())
    }

    pub fn protocol(msg: impl Into<String>) -> Self {
        Error::Protocol(msg.into())
    }
}
