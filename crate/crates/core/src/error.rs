use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("grid mismatch: {0}")]
    GridMismatch(String),

    #[error("infeasible exponents: {0}")]
    InfeasibleExponents(String),

    #[error(
        "Picard iteration does not contract on subinterval {subinterval} \
         (measured factor {factor:.3e} after {iterations} iterations)"
    )]
    NonContraction {
        subinterval: usize,
        iterations: usize,
        factor: f64,
    },

    #[error(
        "Picard iteration hit the limit of {iterations} iterations on subinterval \
         {subinterval} with residual {residual:.3e}"
    )]
    MaxIterations {
        subinterval: usize,
        iterations: usize,
        residual: f64,
    },

    #[error("size guard exceeded: {0}")]
    SizeGuard(String),

    #[error("missing constant: {0}")]
    MissingConstant(String),
}

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidInput(msg.into())
}
