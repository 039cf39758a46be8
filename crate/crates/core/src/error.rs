use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("potential has nonzero mean {0:e}; remove the mean first")]
    NonzeroMean(f64),
    #[error("lambda = {lambda:e} exceeds the solver window (max {max:e}); rebuild with a larger window")]
    StepOverflow { lambda: f64, max: f64 },
    #[error("bracket failure: {0}")]
    Bracket(String),
    #[error("no convergence: {0}")]
    Convergence(String),
    #[error("spectral mislocation: {0}")]
    Mislocation(String),
    #[error("invalid input: {0}")]
    Invalid(String),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    /// True for failures of the numerics rather than of the input or the filesystem.
    pub fn is_numerical(&self) -> bool {
        !matches!(self, Error::Invalid(_) | Error::Io(_) | Error::Json(_))
    }
}
