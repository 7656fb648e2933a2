use thiserror::Error;

/// Failure modes shared by every module of the crate.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    /// An argument lies outside the mathematical domain of the operation.
    #[error("domain error: {0}")]
    Domain(String),
    /// The caller combined otherwise valid inputs in an unsupported way.
    #[error("usage error: {0}")]
    Usage(String),
    /// `exp(alpha_N |s|^{N/(N-1)})` is not representable at `s`.
    #[error("exponential saturation at s = {s} (radius {radius:?})")]
    Saturation { s: f64, radius: Option<f64> },
    /// A discrete identity that must hold up to rounding was violated.
    #[error("numerical inconsistency: {0}")]
    Numerical(String),
    /// The profile makes a ratio or normalisation undefined.
    #[error("degenerate profile: {0}")]
    Degenerate(String),
    #[error("parse error: {0}")]
    Parse(String),
}

pub type Result<T> = std::result::Result<T, Error>;
