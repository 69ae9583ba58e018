use thiserror::Error;

/// Errors raised by the urn engine, the estimators and the Monte Carlo harness.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    /// A function argument violated its documented precondition.
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    /// A configuration failed validation. Every violated constraint is listed.
    #[error("invalid configuration: {}", .0.join("; "))]
    InvalidConfig(Vec<String>),

    /// A policy emitted a value outside the support allowed by the model.
    #[error("model violation at step {step}: {message}")]
    ModelViolation { step: u64, message: String },

    /// The exact integer composition would exceed 64 bits.
    #[error("ball count overflow at step {step}")]
    Overflow { step: u64 },

    /// An error raised inside one Monte Carlo replication.
    #[error("replication {rep}: {source}")]
    Replication {
        rep: u64,
        #[source]
        source: Box<Error>,
    },
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidParameter(msg.into())
    }

    pub(crate) fn in_rep(self, rep: u64) -> Self {
        Error::Replication {
            rep,
            source: Box::new(self),
        }
    }
}
