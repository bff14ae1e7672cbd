use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    /// The channel fails the state-symmetry condition; `witness` is a user
    /// permutation (1-indexed images) for which no state permutation exists.
    #[error("channel is not state-symmetric: no state permutation matches user permutation {witness:?}")]
    Asymmetric { witness: Vec<usize> },

    #[error("waterfilling calibration failed: {0}")]
    Calibration(String),

    #[error("channel description: {0}")]
    Parse(String),

    #[error("internal invariant violated: {0}")]
    Internal(String),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }

    pub(crate) fn internal(msg: impl Into<String>) -> Self {
        Error::Internal(msg.into())
    }
}
