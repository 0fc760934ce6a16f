//! Error type shared by all modules of this crate.

use std::fmt;

/// Convenience alias used throughout the crate.
pub type Result<T> = std::result::Result<T, Error>;

/// Failure conditions reported by model construction, estimation and
/// fitting routines.
#[derive(Debug, Clone, PartialEq)]
pub enum Error {
    /// An argument violated a documented precondition.
    InvalidArg(String),
    /// AR coefficients describe a non-stationary process (a characteristic
    /// root lies on or outside the unit circle, within margin).
    UnstableAr,
    /// Two sequences or containers that must agree in length do not.
    LengthMismatch { expected: usize, actual: usize },
    /// A matrix that must be positive definite failed to factor.
    SingularMatrix(&'static str),
    /// Requested problem size exceeds the guard for dense solvers.
    SizeLimit { size: usize, max: usize },
    /// An index referred outside the valid range of a sequence.
    IndexOutOfRange { index: usize, len: usize },
    /// A computation produced a non-finite value.
    NonFiniteValue(&'static str),
    /// An extrinsic message carries no information (posterior equals prior).
    NoInformation,
    /// The normal equations of a fit are singular.
    SingularSystem,
    /// A fitted AR model is unstable; coefficients are reported so the
    /// caller can inspect or project them.
    UnstableFit { coeffs: Vec<num_complex::Complex64> },
}

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::InvalidArg(msg) => write!(f, "invalid argument: {msg}"),
            Error::UnstableAr => write!(f, "AR coefficients describe an unstable process"),
            Error::LengthMismatch { expected, actual } => {
                write!(f, "length mismatch: expected {expected}, got {actual}")
            }
            Error::SingularMatrix(what) => write!(f, "matrix not positive definite: {what}"),
            Error::SizeLimit { size, max } => {
                write!(f, "problem size {size} exceeds dense-solver limit {max}")
            }
            Error::IndexOutOfRange { index, len } => {
                write!(f, "index {index} out of range for length {len}")
            }
            Error::NonFiniteValue(what) => write!(f, "non-finite value in {what}"),
            Error::NoInformation => write!(f, "extrinsic message carries no information"),
            Error::SingularSystem => write!(f, "normal equations are singular"),
            Error::UnstableFit { coeffs } => {
                write!(f, "fitted AR model is unstable (order {})", coeffs.len())
            }
        }
    }
}

impl std::error::Error for Error {}
