use thiserror::Error;

/// Errors raised by the library.
#[derive(Debug, Error)]
pub enum Error {
    /// Invalid sizes, ranges, or option combinations.
    #[error("configuration error: {0}")]
    Config(String),

    /// An argument outside the operator's domain (negative time, non-positive weight, ...).
    #[error("domain error: {0}")]
    Domain(String),

    /// A documented precondition does not hold for the supplied data.
    #[error("precondition violated: {0}")]
    Precondition(String),

    /// Two fields built on different geometries were combined.
    #[error("shape mismatch: {0}")]
    Shape(String),

    /// Non-finite values or a numerical procedure that failed to converge.
    #[error("numeric error: {0}")]
    Numeric(String),

    /// A collection of configuration violations, reported together.
    #[error("invalid configuration:\n  - {}", .0.join("\n  - "))]
    Invalid(Vec<String>),

    /// The time integrator produced non-finite values; `coeffs` is the last finite state.
    #[error("non-finite state at t = {t} after {steps} steps")]
    Blowup { t: f64, steps: u64, coeffs: Box<ndarray::Array2<f64>> },

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    #[error("format error: {0}")]
    Format(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl From<csv::Error> for Error {
    fn from(e: csv::Error) -> Self {
        Error::Format(e.to_string())
    }
}

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        Error::Format(e.to_string())
    }
}
