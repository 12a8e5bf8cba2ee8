//! Crate-wide error type.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("site index {site} out of range for {n_sites} sites")]
    SiteOutOfRange { site: usize, n_sites: usize },

    #[error("invalid subsystem index set: {0}")]
    InvalidIndexSet(String),

    #[error("matrix is not Hermitian (max asymmetry {deviation:.3e}, tolerance {tol:.1e})")]
    NotHermitian { deviation: f64, tol: f64 },

    #[error("non-finite matrix entry at ({row}, {col})")]
    NonFinite { row: usize, col: usize },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("pulse evaluated outside its domain: t = {t} ns, duration = {duration} ns")]
    PulseOutOfRange { t: f64, duration: f64 },

    #[error("requested peak center {omega} rad/ns outside Nyquist range {nyquist} rad/ns")]
    OutsideNyquist { omega: f64, nyquist: f64 },

    #[error("cost functional increased by {increase:.3e} at iteration {iteration}; lambda_a is too small for a monotonic step")]
    NonMonotonicStep { iteration: usize, increase: f64 },

    #[error("scenario validation failed:\n{0}")]
    Validation(String),

    #[error("config error: {0}")]
    Config(String),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
