//! Crate-wide error type.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    /// A structural precondition on a kernel or model shape was violated.
    #[error("invalid shape: {0}")]
    InvalidShape(String),

    /// Vector length did not match the expected dimension.
    #[error("length mismatch: expected {expected}, got {got}")]
    LengthMismatch { expected: usize, got: usize },

    /// Materializing a dense tensor would exceed the size guard.
    #[error("dense tensor of {requested} entries exceeds the guard of {guard}")]
    SizeGuard { requested: u128, guard: u128 },

    /// An invalid scalar argument (negative scale, bad cutoff, ...).
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    /// The reference series has zero variance on the evaluated range.
    #[error("reference signal has zero variance on the evaluated range")]
    ZeroVariance,

    /// A dataset's valid range is empty for the given model memory.
    #[error("empty valid range: {len} samples with warm-up {warmup}")]
    EmptyValidRange { len: usize, warmup: usize },

    /// A gradient component was NaN or infinite.
    #[error("non-finite gradient component at index {index}")]
    NonFiniteGradient { index: usize },

    /// Training loss became NaN or infinite.
    #[error("training diverged at epoch {epoch}: loss = {loss}")]
    Diverged { epoch: usize, loss: f64 },

    /// The simulated state became NaN or infinite.
    #[error("non-finite state at sample {index}")]
    NonFiniteState { index: usize },

    /// A file could not be parsed.
    #[error("malformed file {path}: {message}")]
    MalformedFile { path: String, message: String },

    /// An I/O operation on a named file failed.
    #[error("cannot access {path}: {source}")]
    FileIo { path: String, source: std::io::Error },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error("JSON error: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
