use thiserror::Error;

/// Errors raised by the encoding, analysis and attention routines.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    /// Input failed a precondition (odd lattice size, non-finite value, bad flag).
    #[error("validation error: {0}")]
    Validation(String),
    /// An index or parameter lies outside the domain of the operation.
    #[error("domain error: {0}")]
    Domain(String),
    #[error("shape mismatch in {context}: expected {expected}, found {found}")]
    Shape {
        context: &'static str,
        expected: String,
        found: String,
    },
    /// The input makes the operation undefined (e.g. renormalizing a zero spectrum).
    #[error("degenerate input: {0}")]
    Degenerate(String),
    #[error("state error: {0}")]
    State(String),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn shape_err(
    context: &'static str,
    expected: impl std::fmt::Debug,
    found: impl std::fmt::Debug,
) -> Error {
    Error::Shape {
        context,
        expected: format!("{expected:?}"),
        found: format!("{found:?}"),
    }
}
