use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("matrix is not Hermitian (relative asymmetry {0:.3e})")]
    NotHermitian(f64),
    #[error("matrix is not positive definite")]
    NotPositiveDefinite,
    #[error("matrix is not positive semidefinite (min eigenvalue {0:.3e})")]
    NotPositiveSemidefinite(f64),
    #[error("matrix has an empty dimension ({rows}x{cols})")]
    EmptyMatrix { rows: usize, cols: usize },
    #[error("matrix contains non-finite entries")]
    NonFinite,
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("invalid tolerance: {0}")]
    InvalidTolerance(String),
    #[error("power must be positive and finite, got {0}")]
    InvalidPower(f64),
    #[error("noise cross-covariance has spectral norm {0} > 1")]
    NoiseOutsideBall(f64),
    #[error("noise covariance is singular (sigma_max(Phi) = {0}); use the singular-noise reduction")]
    SingularNoise(f64),
    #[error("numerical rank is ambiguous at the chosen tolerance")]
    NumericalRankAmbiguity,
    #[error("eavesdropper matrix lacks full column rank")]
    RankDeficient,
    #[error("precondition violated: {0}")]
    PreconditionViolated(String),
    #[error("domain error: {0}")]
    DomainError(String),
    #[error("cross-check mismatch: {0}")]
    CrossCheckMismatch(String),
}

pub type Result<T> = std::result::Result<T, Error>;
