use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("a Chebyshev basis needs at least 2 nodes, got {0}")]
    TooFewNodes(usize),

    #[error("grid functions live on different bases (n = {left} vs n = {right})")]
    BasisMismatch { left: usize, right: usize },

    #[error("expected {expected} samples, got {got}")]
    LengthMismatch { expected: usize, got: usize },

    #[error("derivative order {order} is not resolvable with {n} nodes")]
    DerivativeOrder { order: usize, n: usize },

    #[error("invalid problem parameters: {0}")]
    InvalidParams(String),

    #[error("lambda = {re}{im:+}i is outside the point spectrum (Re lambda must be < 1/2)")]
    OutsidePointSpectrum { re: f64, im: f64 },

    #[error("Frobenius series at lambda = {lambda} does not terminate below degree {cap}")]
    NonTerminating { lambda: f64, cap: usize },

    #[error("{what}: residual {residual:.3e} exceeds tolerance {tolerance:.3e}")]
    Residual {
        what: &'static str,
        residual: f64,
        tolerance: f64,
    },

    #[error("Gram system is ill-conditioned (condition number {0:.3e})")]
    IllConditioned(f64),

    #[error("Gram matrix is not positive definite")]
    NotPositiveDefinite,

    #[error("CFL violation at tau = {tau:.4}: norm {norm:.3e} exceeds {limit:.3e}")]
    CflViolation { tau: f64, norm: f64, limit: f64 },

    #[error("invalid fit window: {0}")]
    FitWindow(String),

    #[error("I/O error: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        Error::Io(e.to_string())
    }
}
