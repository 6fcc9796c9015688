//! Crate-wide error type.

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Error, Debug, Clone, PartialEq)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("quadrature failed to reach tolerance {tol:e} (best error {best:e})")]
    QuadratureFailure { tol: f64, best: f64 },

    #[error("singular argument: {0}")]
    SingularArgument(String),

    #[error("layer index {index} out of range 1..={max}")]
    IndexOutOfRange { index: usize, max: usize },

    #[error("grid has {nodes} nodes, exceeding the dense-factorization cap {cap}")]
    GridTooLarge { nodes: usize, cap: usize },

    #[error("covariance matrix is not positive semi-definite (min eigenvalue {min_eig:e})")]
    CovarianceNotPSD { min_eig: f64 },

    #[error("point outside domain: {0}")]
    OutOfDomain(String),

    #[error("unknown preset `{0}`")]
    UnknownPreset(String),

    #[error("rho floor violated: rho = {rho:e} <= floor {floor:e}")]
    RhoFloorViolation { rho: f64, floor: f64 },

    #[error("matrix is not symmetric (max asymmetry {0:e})")]
    NotSymmetric(f64),

    #[error("matrix is indefinite (min eigenvalue {0:e})")]
    IndefiniteMatrix(f64),

    #[error("time {t} exceeds additive-functional horizon {horizon}")]
    HorizonExceeded { t: f64, horizon: f64 },

    #[error("config error at `{path}`: {message}")]
    Parse { path: String, message: String },

    #[error("io error: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}
