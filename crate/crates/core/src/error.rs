use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("lattice size must be odd and at least 3, got {0}")]
    InvalidLattice(usize),

    #[error("lattice size mismatch: expected {expected}, found {found}")]
    SizeMismatch { expected: usize, found: usize },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("invalid syndrome: {0}")]
    InvalidSyndrome(String),

    /// The requested computation exceeds what the decoder can handle.
    #[error("capacity exceeded: {0}")]
    Capacity(String),

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("threshold fit failed: {0}")]
    Fit(String),

    #[error("checkpoint: {0}")]
    Checkpoint(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    /// Process exit code used by the command-line front end.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::InvalidParameter(_) | Error::InvalidLattice(_) => 2,
            Error::Capacity(_) => 3,
            Error::Numerical(_) | Error::Fit(_) => 4,
            _ => 1,
        }
    }
}
