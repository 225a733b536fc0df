use thiserror::Error;

/// Errors raised across the library.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("integration failed at t = {t}: {reason}")]
    Integration { t: f64, reason: String },

    #[error("no section crossing within horizon {horizon} (started at t = {t_start})")]
    HorizonExceeded { t_start: f64, horizon: f64 },

    #[error("map shape error: {0}")]
    Shape(String),

    #[error("fit error: {0}")]
    Fit(String),

    #[error("derivative undefined at singular point x = {0}")]
    SingularPoint(f64),

    #[error("numerical error: {0}")]
    Numerical(String),

    #[error("construction error: {0}")]
    Construction(String),

    #[error("spectral error: {0}")]
    Spectral(String),

    #[error("shape mismatch: expected {expected}, got {got}")]
    ShapeMismatch { expected: usize, got: usize },

    #[error("i/o error: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
