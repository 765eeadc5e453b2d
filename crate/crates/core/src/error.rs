use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("unsupported wavelet family: {0}")]
    UnsupportedFamily(String),
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("index does not match the consistency function: {0}")]
    IndexKind(String),
    #[error("capacity exceeded: {0}")]
    Capacity(String),
    #[error("degenerate input: {0}")]
    Degenerate(String),
    #[error("frequency {0:?} lies outside the simulated band")]
    OutOfBand(Vec<i64>),
    #[error("scan box boundary attained for {0} element(s)")]
    BoundaryAttained(usize),
    #[error("{0} sampled rank(s) fall outside the mask extent")]
    OutOfExtent(usize),
    #[error("solver did not converge after {iterations} iterations (final residual {final_residual:.3e})")]
    NonConvergence {
        iterations: usize,
        final_residual: f64,
        residual_history: Vec<f64>,
    },
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// True for failures that stem from bad inputs rather than numerics.
    pub fn is_config_error(&self) -> bool {
        matches!(
            self,
            Error::UnsupportedFamily(_)
                | Error::InvalidConfig(_)
                | Error::IndexKind(_)
                | Error::Json(_)
                | Error::OutOfExtent(_)
        )
    }
}

pub type Result<T> = std::result::Result<T, Error>;
