use std::path::PathBuf;

/// Errors produced by the training library.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("degenerate hinge range: max {s} must exceed min {r}")]
    DegenerateRange { r: f64, s: f64 },

    #[error("invalid hinge count {0}: at least 2 hinges are required")]
    InvalidHingeCount(usize),

    #[error("net value {value} lies outside the hinge range [{r}, {s}]")]
    OutOfRange { value: f64, r: f64, s: f64 },

    #[error(
        "hidden unit {unit} has a constant net value {value} over all patterns; \
         reseed the input weights or reduce the number of hidden units"
    )]
    DegenerateUnit { unit: usize, value: f64 },

    #[error("need at least {needed} patterns, got {got}")]
    TooFewPatterns { needed: usize, got: usize },

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("non-finite input value at pattern {pattern}, column {column}")]
    NonFiniteInput { pattern: usize, column: usize },

    #[error("first basis function is degenerate (r(1,1) = {value:e}, threshold {threshold:e})")]
    FirstBasisDegenerate { value: f64, threshold: f64 },

    #[error("empty dataset")]
    EmptyDataset,

    #[error("non-finite update in iteration {iteration}: {what}")]
    NonFiniteUpdate { iteration: usize, what: String },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("{path}:{line}: {message}")]
    Parse {
        path: PathBuf,
        line: u64,
        message: String,
    },

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
