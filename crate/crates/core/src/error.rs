use thiserror::Error;

/// Errors raised by the operators, solvers and diagnostics in this crate.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("fractional order {alpha} outside {allowed}")]
    InvalidOrder { alpha: f64, allowed: &'static str },

    #[error("non-finite value in {what} at node {index}")]
    NonFinite { what: String, index: usize },

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("boundary condition violated: {0}")]
    Boundary(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("partial derivative check failed: {0}")]
    PartialsMismatch(String),

    #[error("invalid symmetry group: {0}")]
    InvalidSymmetry(String),

    #[error("solver did not converge after {iterations} iterations (gradient max-norm {gradient_norm:.3e})")]
    NotConverged { iterations: usize, gradient_norm: f64 },

    #[error("line search failed after {halvings} step halvings (gradient max-norm {gradient_norm:.3e})")]
    LineSearch { halvings: usize, gradient_norm: f64 },

    #[error("penalty schedule infeasible: dynamics defect {defects:?} not decreasing across rounds")]
    Infeasible { defects: Vec<f64> },

    #[error("integration unstable at t = {t}: |q| = {magnitude:.3e}")]
    Unstable { t: f64, magnitude: f64 },

    #[error("csv: {0}")]
    Csv(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl From<csv::Error> for Error {
    fn from(e: csv::Error) -> Self {
        Error::Csv(e.to_string())
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Csv(e.to_string())
    }
}
