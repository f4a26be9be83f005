use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid potential: {0}")]
    InvalidPotential(String),

    #[error("invalid ensemble index {0}; expected 1, 2 or 4")]
    InvalidBeta(u32),

    #[error("argument {value} outside supported range [{lo}, {hi}]")]
    OutOfRange { value: f64, lo: f64, hi: f64 },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("{what} did not converge (residual {residual:.3e})")]
    NoConvergence { what: &'static str, residual: f64 },

    #[error("{what} is numerically singular (condition number {condition:.3e})")]
    Singular { what: &'static str, condition: f64 },

    #[error("equilibrium density factor h_N is not positive on [-1, 1] (min {min:.3e})")]
    NonPositiveDensity { min: f64 },

    #[error("equilibrium measure is not supported on a single interval (effective potential dips at {at:.3})")]
    NotOneCut { at: f64 },

    #[error("determinant {value:.3e} is negative beyond tolerance")]
    NegativeDeterminant { value: f64 },

    #[error("malformed table: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
