use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    /// The AR model itself is unusable, e.g. not causal.
    #[error("model error: {0}")]
    Model(String),

    #[error("degenerate data: {0}")]
    DegenerateData(String),

    #[error("no convergence: {message}")]
    Convergence {
        message: String,
        /// Last iterate reached before giving up.
        last_iterate: Vec<f64>,
    },

    #[error("forecast scoring failed at index {index}: {message}")]
    Scoring { index: usize, message: String },

    #[error("i/o error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },

    #[error("format error: {0}")]
    Format(String),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidInput(msg.into())
    }

    pub(crate) fn degenerate(msg: impl Into<String>) -> Self {
        Error::DegenerateData(msg.into())
    }

    pub(crate) fn convergence(msg: impl Into<String>, last_iterate: &[f64]) -> Self {
        Error::Convergence {
            message: msg.into(),
            last_iterate: last_iterate.to_vec(),
        }
    }

    pub fn is_convergence(&self) -> bool {
        matches!(self, Error::Convergence { .. })
    }
}
