use std::path::PathBuf;

use thiserror::Error;

/// Errors produced anywhere in the crate.
#[derive(Debug, Error)]
pub enum Error {
    /// An argument lies outside the mathematical domain of an operation.
    #[error("domain error: {0}")]
    Domain(String),

    #[error("dimension mismatch: expected {expected}, found {found}")]
    Shape { expected: usize, found: usize },

    /// A point is not covered by any region of a partition (or by a sampled grid).
    #[error("point {point:?} is not covered by any region")]
    Coverage { point: Vec<f64> },

    #[error("map singularity at {point:?}: {reason}")]
    Singularity { point: Vec<f64>, reason: String },

    #[error("node map is not injective: nodes {first} and {second} coincide after mapping")]
    NonInjective { first: usize, second: usize },

    /// The kernel matrix could not be factored, or its condition estimate is too large.
    #[error("ill-conditioned kernel matrix (condition estimate {estimate:e})")]
    IllConditioned { estimate: f64 },

    #[error("numerical breakdown: {0}")]
    Breakdown(String),

    #[error("invalid input: {0}")]
    Invalid(String),

    /// Every value of the shape-parameter grid was rejected.
    #[error("shape parameter selection failed: all {} grid values were rejected", failures.len())]
    Selection { failures: Vec<(f64, String)> },

    #[error("residual increased for {iterations} consecutive iterations; reduce the relaxation factor")]
    StepSize { iterations: usize },

    #[error("invalid `{field}`: {message}")]
    Config { field: String, message: String },

    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{}: {message}", path.display())]
    Parse { path: PathBuf, message: String },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io { path: path.into(), source }
    }

    pub(crate) fn parse(path: impl Into<PathBuf>, message: impl ToString) -> Self {
        Error::Parse { path: path.into(), message: message.to_string() }
    }

    pub(crate) fn config(field: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Config { field: field.into(), message: message.into() }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
