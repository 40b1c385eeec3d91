use thiserror::Error;

/// Errors produced by the algebra, kernel, operator and transform layers.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("signature size n={0} outside supported range 1..=6")]
    UnsupportedSignature(usize),

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("non-finite coefficient in input")]
    NonFinite,

    #[error("element is not in the quadratic cone (violation {violation:.3e})")]
    NotInCone { violation: f64 },

    #[error("invalid polynomial: {0}")]
    InvalidPolynomial(String),

    #[error("operator is not invertible (sigma_min={sigma_min:.3e}, sigma_max={sigma_max:.3e})")]
    NotInvertible { sigma_min: f64, sigma_max: f64 },

    #[error("hypothesis violated: rate {rate:.6} must exceed omega {omega:.6} by at least {margin:.1e}")]
    HypothesisViolated { rate: f64, omega: f64, margin: f64 },

    #[error("quadrature did not reach tolerance {tol:.1e}: best error estimate {err_est:.3e}")]
    Accuracy { tol: f64, err_est: f64 },

    #[error("kernel has imaginary residue {0:.3e}; expected a real-valued kernel")]
    KernelNotReal(f64),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}

pub type Result<T> = std::result::Result<T, Error>;
