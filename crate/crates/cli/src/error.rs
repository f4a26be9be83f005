use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("usage: {0}")]
    Usage(String),
    #[error("tolerance check failed: {0}")]
    Numerical(String),
    #[error("missing dependency: {0}")]
    Missing(String),
    #[error(transparent)]
    Core(#[from] airy_edge::Error),
    #[error("i/o: {0}")]
    Io(#[from] std::io::Error),
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}

impl CliError {
    /// 0 success, 1 numerical failure, 2 usage, 3 missing dependency.
    pub fn exit_code(&self) -> i32 {
        use airy_edge::Error as E;
        match self {
            CliError::Usage(_) => 2,
            CliError::Missing(_) => 3,
            CliError::Core(E::InvalidPotential(_) | E::InvalidBeta(_) | E::InvalidArgument(_) | E::OutOfRange { .. }) => 2,
            _ => 1,
        }
    }
}
