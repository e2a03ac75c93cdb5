use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    /// A caller-supplied parameter is outside its documented range.
    #[error("invalid parameter `{name}`: {reason}")]
    Parameter { name: &'static str, reason: String },

    /// An instance field failed validation (while loading or constructing).
    #[error("invalid field `{field}`: {reason}")]
    InvalidField { field: String, reason: String },

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    /// API misuse such as selecting the same sensor twice.
    #[error("usage error: {0}")]
    Usage(String),

    #[error("matrix is not positive definite: {0}")]
    NotPositiveDefinite(String),

    #[error("exhaustive search refused: C({n}, {k}) = {count} exceeds cap {cap}")]
    EnumerationCap { n: usize, k: usize, count: u128, cap: u128 },

    /// Numerical state that can only arise from corrupted inputs.
    #[error("internal numerical error: {0}")]
    Numerical(String),

    #[error("malformed file: {0}")]
    Parse(#[from] serde_json::Error),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn param(name: &'static str, reason: impl Into<String>) -> Self {
        Error::Parameter {
            name,
            reason: reason.into(),
        }
    }

    pub(crate) fn field(field: impl Into<String>, reason: impl Into<String>) -> Self {
        Error::InvalidField {
            field: field.into(),
            reason: reason.into(),
        }
    }
}
