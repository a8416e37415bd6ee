use thiserror::Error;

/// Crate-wide error type.
#[derive(Debug, Error)]
pub enum Error {
    /// A configuration value violates its documented invariant.
    #[error("configuration error: {0}")]
    Config(String),

    /// An operation was called outside its contract (wrong shape, wrong
    /// step index, empty input, ...).
    #[error("contract violation: {0}")]
    Contract(String),

    /// GARCH parameters with nu + xi + lambda/2 >= 1 have no stationary
    /// variance.
    #[error("non-stationary GARCH parameters: {0}")]
    NonStationary(String),

    /// The data cannot support the requested estimation.
    #[error("degenerate data: {0}")]
    DegenerateData(String),

    /// Training produced a NaN loss or gradient.
    #[error("training diverged: {0}")]
    Divergence(String),

    #[error("format error: {0}")]
    Format(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
