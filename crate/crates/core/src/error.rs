use thiserror::Error;

/// Errors raised by the model, the discretization and the solvers.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    /// Bad arguments or a configuration that violates a precondition.
    #[error("input error: {0}")]
    Input(String),

    /// A solver produced something unusable (nonpositive null vector, singular system).
    #[error("solver error: {0}")]
    Solver(String),

    /// An iteration ran out of steps before meeting its tolerance.
    #[error("no convergence after {iterations} iterations (last residual {residual:.3e}): {hint}")]
    NonConvergence {
        iterations: usize,
        residual: f64,
        hint: String,
    },

    /// The configuration is valid but outside what an operation supports.
    #[error("unsupported configuration: {0}")]
    Unsupported(String),
}

impl Error {
    pub(crate) fn input(msg: impl Into<String>) -> Self {
        Error::Input(msg.into())
    }

    pub(crate) fn solver(msg: impl Into<String>) -> Self {
        Error::Solver(msg.into())
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
