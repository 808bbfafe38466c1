use thiserror::Error;

/// Error type shared across the crate.
///
/// The variants map onto process exit codes in the CLI: `Usage` and
/// `Config` exit with 2, everything else with 1.
#[derive(Debug, Error)]
pub enum Error {
    /// Invalid configuration (bad qubit counts, non-power-of-two trees, ...).
    #[error("configuration error: {0}")]
    Config(String),

    /// API misuse (shape mismatches, out-of-range indices, ...).
    #[error("usage error: {0}")]
    Usage(String),

    /// Bad input data (non-finite values, inconsistent datasets).
    #[error("data error: {0}")]
    Data(String),

    /// Numeric failure at runtime (NaN objective, division by zero).
    #[error("numeric error: {0}")]
    Numeric(String),

    /// Malformed binary file; reports the byte offset of the problem.
    #[error("format error at byte {offset}: {msg}")]
    Format { offset: u64, msg: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub fn config(msg: impl Into<String>) -> Self {
        Error::Config(msg.into())
    }

    pub fn usage(msg: impl Into<String>) -> Self {
        Error::Usage(msg.into())
    }

    pub fn data(msg: impl Into<String>) -> Self {
        Error::Data(msg.into())
    }

    pub fn numeric(msg: impl Into<String>) -> Self {
        Error::Numeric(msg.into())
    }

    pub fn format(offset: u64, msg: impl Into<String>) -> Self {
        Error::Format {
            offset,
            msg: msg.into(),
        }
    }

    /// Process exit code the CLI maps this error to.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Usage(_) | Error::Config(_) => 2,
            _ => 1,
        }
    }
}
