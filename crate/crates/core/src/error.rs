use num_complex::Complex64;
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("no sign change on [{lo}, {hi}]")]
    Bracket { lo: f64, hi: f64 },

    /// Carries the best estimate reached before giving up.
    #[error("quadrature did not converge (estimate {estimate}, error {error:e})")]
    Quadrature { estimate: Complex64, error: f64 },

    #[error("mode cutoff: no guided HE11 solution ({0})")]
    ModeCutoff(String),

    #[error("singular transfer: {0}")]
    SingularTransfer(String),

    #[error("invalid rates: {0}")]
    InvalidRates(String),

    #[error("invalid parameter: {0}")]
    Invalid(String),
}

pub type Result<T> = std::result::Result<T, Error>;
