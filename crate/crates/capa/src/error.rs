use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    Invalid(String),

    #[error("user is not in front of the aperture (Psi = {0})")]
    BehindAperture(f64),

    #[error("evaluation point coincides with the user position")]
    CoincidentPoint,

    #[error("integrand is not finite at ({x}, {z})")]
    NonFinite { x: f64, z: f64 },

    #[error("adaptive quadrature did not converge: estimated error {estimate:e} after {intervals} intervals")]
    NoConvergence { estimate: f64, intervals: usize },

    #[error("|rho| = {0} exceeds 1 beyond quadrature slack; raise the quadrature order")]
    CorrelationOverflow(f64),

    #[error("fields live on different grids ({0} vs {1} points)")]
    GridMismatch(usize, usize),

    #[error("field has zero norm")]
    ZeroField,

    #[error("matrix is singular (condition estimate {0:e})")]
    Singular(f64),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    Dimension { expected: usize, got: usize },

    #[error("scene needs {needed} users, has {found}")]
    UserCount { needed: usize, found: usize },

    #[error("config: {0}")]
    Config(String),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::Invalid(msg.into()))
}
