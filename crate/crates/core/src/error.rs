use thiserror::Error;

/// Errors produced by model construction, integration and scenario loading.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid degree support: {0}")]
    InvalidSupport(String),

    #[error("value out of domain: {0}")]
    Domain(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("consistency error: {0}")]
    Consistency(String),

    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("validation error in `{field}`: {constraint}")]
    Validation { field: String, constraint: String },
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

pub(crate) fn validation(field: impl Into<String>, constraint: impl Into<String>) -> Error {
    Error::Validation {
        field: field.into(),
        constraint: constraint.into(),
    }
}
