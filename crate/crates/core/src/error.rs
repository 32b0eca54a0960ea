use alloc::string::String;

/// Errors raised by the simulation and positioning routines.
///
/// Every variant corresponds to a rejected input; numerical routines in this
/// crate do not fail on valid input.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("unsupported spin quantum number {0} (only 1/2 and 1)")]
    UnsupportedSpin(f64),
    #[error("matrix is not Hermitian (relative deviation {deviation:.3e})")]
    NotHermitian { deviation: f64 },
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("coupled spins sit at the same point (dipolar singularity)")]
    ZeroDisplacement,
    #[error("environment dimension {dim} exceeds the dense-evolution limit {max}")]
    DimensionOverflow { dim: usize, max: usize },
    #[error("noise spectrum contains a zero-frequency line; remove the DC part first")]
    ZeroFrequencyLine,
    #[error("dip frequency must be positive, got {0} rad/us")]
    NonPositiveFrequency(f64),
    #[error("no coherence dip found for sensor {0}")]
    NoDip(String),
}

pub type Result<T, E = Error> = core::result::Result<T, E>;

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidArgument(msg.into())
}
