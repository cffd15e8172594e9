use thiserror::Error;

/// Errors raised by the modelling, analytics and simulation layers.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    /// A configuration value violates a documented constraint.
    #[error("invalid configuration `{field}`: {reason}")]
    Config { field: String, reason: String },

    /// An argument lies outside the mathematical domain of an operation.
    #[error("domain error in {op}: {reason}")]
    Domain { op: &'static str, reason: String },

    /// The closed-form evaluators would lose too many digits to be trusted.
    #[error(
        "precision limit exceeded in {op} (M = {m}, alpha = {alpha}): {reason}"
    )]
    Precision {
        op: &'static str,
        m: usize,
        alpha: f64,
        reason: String,
    },

    /// A requested size is beyond what the implementation supports.
    #[error("unsupported request in {op}: {reason}")]
    Unsupported { op: &'static str, reason: String },

    /// A linear system could not be solved.
    #[error("singular or rank-deficient system in {op}")]
    Singular { op: &'static str },

    /// A runtime self-check on simulation output failed.
    #[error("invariant violated: {0}")]
    Invariant(String),
}

impl Error {
    pub(crate) fn config(field: impl Into<String>, reason: impl Into<String>) -> Self {
        Error::Config {
            field: field.into(),
            reason: reason.into(),
        }
    }

    pub(crate) fn domain(op: &'static str, reason: impl Into<String>) -> Self {
        Error::Domain {
            op,
            reason: reason.into(),
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
