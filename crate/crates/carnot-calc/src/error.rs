use thiserror::Error;

/// Errors reported by the library.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum CalcError {
    #[error("invalid group: {0}")]
    InvalidGroup(String),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("index out of range: {0}")]
    IndexOutOfRange(String),
    #[error("characteristic point: W = {w:e} is below the threshold {tau:e}")]
    CharacteristicPoint { w: f64, tau: f64 },
    #[error("degenerate surface: {0}")]
    DegenerateSurface(String),
    #[error("numeric failure: {0}")]
    NumericFailure(String),
    #[error("surface is not H-minimal on the support: max |H| = {max_h:e} exceeds {tol:e}")]
    NotMinimal { max_h: f64, tol: f64 },
    #[error("support violation: {0}")]
    Support(String),
    #[error("unsupported: {0}")]
    Unsupported(String),
    #[error("parse error: {0}")]
    Parse(String),
}

pub type Result<T> = std::result::Result<T, CalcError>;
