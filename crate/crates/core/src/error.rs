use thiserror::Error;

/// Errors raised by the estimators, landscape evaluators and bounds.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid design grid: {0}")]
    InvalidGrid(String),

    #[error("insufficient points: need more than {needed} design points, got {got}")]
    InsufficientPoints { needed: usize, got: usize },

    #[error("dimension mismatch: expected {expected}, got {got}")]
    Dimension { expected: usize, got: usize },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("quadratic form is not positive semidefinite: {0}")]
    NotPositiveSemidefinite(String),

    #[error("singular system (condition estimate {condition:.3e})")]
    Singular { condition: f64 },

    #[error("{solver} did not converge after {iterations} iterations (last residual {residual:.3e})")]
    Convergence {
        solver: &'static str,
        iterations: usize,
        residual: f64,
    },

    #[error("radius {radius} is below the minimal trade-off {r_min}")]
    InfeasibleRadius { radius: f64, r_min: f64 },

    #[error("maximizer sits at the right end of the radius grid ({upper}); widen the grid")]
    GridTooNarrow { upper: f64 },
}

impl Error {
    /// True for failures caused by an iterative solver rather than bad input.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::Singular { .. } | Error::Convergence { .. } | Error::GridTooNarrow { .. }
        )
    }
}

pub type Result<T> = std::result::Result<T, Error>;
