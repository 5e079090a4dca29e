use thiserror::Error;

/// Error taxonomy shared by every module.
///
/// `Domain`, `Ordering` and `Unsupported` are precondition violations;
/// `Accuracy` means a truncation/tolerance gate refused to proceed;
/// `Numeric` means an algorithm ran but could not certify its result.
#[derive(Debug, Error)]
pub enum Error {
    #[error("domain: {0}")]
    Domain(String),
    #[error("ordering: {0}")]
    Ordering(String),
    #[error("accuracy: {0}")]
    Accuracy(String),
    #[error("numeric: {0}")]
    Numeric(String),
    #[error("insufficient data: {0}")]
    InsufficientData(String),
    #[error("unsupported: {0}")]
    Unsupported(String),
}

pub type Result<T> = std::result::Result<T, Error>;
