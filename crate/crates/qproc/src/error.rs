use thiserror::Error;

/// Errors shared across the crate.
#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    DimMismatch(String),

    #[error("matrix is not square: {0}x{1}")]
    NotSquare(usize, usize),

    #[error("factor index {0} out of range (matrix has {1} factors)")]
    FactorOutOfRange(usize, usize),

    #[error("matrix is not Hermitian (asymmetry {0:.3e})")]
    NotHermitian(f64),

    #[error("matrix is not positive semidefinite (min eigenvalue {0:.3e})")]
    NotPsd(f64),

    #[error("invalid density matrix: {0}")]
    InvalidDensity(String),

    #[error("singular matrix (pivot {0:.3e})")]
    Singular(f64),

    #[error("ill-conditioned basis (condition number {0:.3e})")]
    IllConditioned(f64),

    #[error("matrix logarithm undefined: eigenvalue {0} too close to the branch cut")]
    LogBranchCut(num_complex::Complex64),

    #[error("iteration failed to converge: {0}")]
    NoConvergence(String),

    #[error("map is not completely positive (min Choi eigenvalue {0:.3e})")]
    NotCp(f64),

    #[error("map is not trace preserving (residual {0:.3e})")]
    NotTp(f64),

    #[error("invalid instrument: {0}")]
    BadInstrument(String),

    #[error("basis is not informationally complete: {0}")]
    NotInformationallyComplete(String),

    #[error("slot mismatch: {0}")]
    SlotMismatch(String),

    #[error("causality violation: {0}")]
    NotCausal(String),

    #[error("conditioning on an outcome of probability {0:.3e}")]
    ZeroProbability(f64),

    #[error("invalid parameter: {0}")]
    BadParam(String),

    #[error("invalid distribution: {0}")]
    BadDistribution(String),
}

pub type Result<T> = std::result::Result<T, Error>;
