use thiserror::Error;

/// Errors produced by the rank-test machinery.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    /// Two observations compare equal; continuous data is assumed throughout.
    #[error("duplicate value {0} in pooled sample; ties are not supported")]
    DuplicateValue(f64),
    #[error("length mismatch: expected {expected}, got {actual}")]
    LengthMismatch { expected: usize, actual: usize },
    /// The number of subsets to enumerate exceeds the configured cap.
    #[error("enumeration of {count} subsets exceeds cap {cap}")]
    CapExceeded { count: String, cap: u64 },
    #[error("quadrature failed to reach tolerance {tolerance:e} (estimated error {estimate:e})")]
    QuadratureFailure { tolerance: f64, estimate: f64 },
    #[error("no solution: {0}")]
    NoSolution(String),
    #[error("target power {target} not reached for sample sizes up to {limit}")]
    NotBracketed { target: f64, limit: usize },
    #[error("degenerate fit: {usable} usable points, need at least 3")]
    DegenerateFit { usable: usize },
    #[error("derivative {0:e} too close to zero")]
    ZeroDerivative(f64),
    #[error("non-finite function value at {0}")]
    NonFinite(f64),
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("coefficient table: {0}")]
    Table(String),
}

impl Error {
    /// Stable variant name, used in machine-readable output.
    pub fn name(&self) -> &'static str {
        match self {
            Error::DuplicateValue(_) => "DuplicateValue",
            Error::LengthMismatch { .. } => "LengthMismatch",
            Error::CapExceeded { .. } => "CapExceeded",
            Error::QuadratureFailure { .. } => "QuadratureFailure",
            Error::NoSolution(_) => "NoSolution",
            Error::NotBracketed { .. } => "NotBracketed",
            Error::DegenerateFit { .. } => "DegenerateFit",
            Error::ZeroDerivative(_) => "ZeroDerivative",
            Error::NonFinite(_) => "NonFinite",
            Error::InvalidParameter(_) => "InvalidParameter",
            Error::Table(_) => "Table",
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
