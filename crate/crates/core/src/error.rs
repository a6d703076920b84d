use thiserror::Error;

/// Errors raised by method construction, the stage solvers and the integrators.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("Newton iteration for the roots of P_{k} did not converge")]
    RootFinding { k: usize },

    #[error("pivot {index} of the Crout factorization is numerically zero ({value:e})")]
    ZeroPivot { index: usize, value: f64 },

    #[error("diagonal entry L[{index}] = {value} deviates from d = {expected}")]
    DiagonalMismatch { index: usize, value: f64, expected: f64 },

    #[error("singular matrix: {0}")]
    Singular(&'static str),

    #[error("state outside the domain of the Hamiltonian: {0}")]
    Domain(String),

    #[error("eigenvalue solver failed")]
    Eigen,

    #[error("time grids do not match: {0}")]
    GridMismatch(String),
}

pub type Result<T> = std::result::Result<T, Error>;
