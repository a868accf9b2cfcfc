use thiserror::Error;

/// Errors raised by the numerical kernels.
#[derive(Debug, Clone, Error)]
pub enum Error {
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("sizing error: {0}")]
    Sizing(String),

    #[error("truncation error: requested {requested} modes but a truncation of {n} exposes at most {available}")]
    Truncation {
        requested: usize,
        available: usize,
        n: usize,
    },

    #[error("domain error: {0}")]
    Domain(String),

    #[error("region has zero measure inside the quadrature window; the Gram matrix is singular (a control region of positive measure is required)")]
    Singular,

    #[error("ill-conditioned: {0}")]
    IllConditioned(String),

    #[error("matrix is indefinite (smallest eigenvalue {0:e})")]
    Indefinite(f64),

    #[error("eta = {eta} too large: weighted norm not stable under window doubling ({narrow:e} vs {wide:e})")]
    EtaTooLarge { eta: f64, narrow: f64, wide: f64 },

    #[error("constant series not monotone at lambda = {lambda}: {previous} > {current} (quadrature or truncation fault)")]
    NonMonotone {
        lambda: f64,
        previous: f64,
        current: f64,
    },

    #[error("Lebeau-Robbiano synthesis did not converge after {phases} phases (relative residual {residual:e})")]
    NonConvergence {
        phases: usize,
        residual: f64,
        trace: Vec<f64>,
    },

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("invalid region: {0}")]
    InvalidRegion(String),
}

pub type Result<T> = std::result::Result<T, Error>;
