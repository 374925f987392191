//! Error taxonomy shared across the library.

use std::path::PathBuf;

/// Errors produced by library operations.
///
/// The variants map one-to-one onto the failure classes the operations
/// document: bad data, bad arguments, bad configuration, bad files,
/// unfittable neighborhoods, diverged training, and broken internal
/// contracts (a bug in the caller or in this crate, never user input).
#[derive(Debug, thiserror::Error)]
pub enum Error {
    /// Input data violates a precondition (non-finite coordinate, empty cloud, ...).
    #[error("invalid input: {0}")]
    InvalidInput(String),

    /// An argument is out of range for the given data (k > N, lambda > T, ...).
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    /// A configuration value or name is not acceptable.
    #[error("configuration error: {0}")]
    Config(String),

    /// A file does not conform to its declared format.
    #[error("format error in {path}: {detail}")]
    Format { path: PathBuf, detail: String },

    /// Underlying I/O failure.
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    /// A neighborhood is rank-deficient (all points identical), so no plane exists.
    #[error("degenerate neighborhood: all points coincide")]
    DegenerateNeighborhood,

    /// Training diverged (non-finite loss) at the reported epoch.
    #[error("training failure: non-finite loss at epoch {epoch}")]
    TrainingFailure { epoch: usize },

    /// An internal invariant was violated; indicates a bug, not bad user input.
    #[error("internal contract violation: {0}")]
    Contract(String),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io { path: path.into(), source }
    }

    pub(crate) fn format(path: impl Into<PathBuf>, detail: impl Into<String>) -> Self {
        Error::Format { path: path.into(), detail: detail.into() }
    }
}

/// Crate-wide result alias.
pub type Result<T> = std::result::Result<T, Error>;
