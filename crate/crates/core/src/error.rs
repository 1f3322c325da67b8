use thiserror::Error;

/// Errors produced by the circuit models and precoder solvers.
#[derive(Debug, Error)]
pub enum Error {
    /// A parameter violated its documented precondition.
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    /// Element placement is inconsistent (coincident antennas, rows that do
    /// not fit on their waveguide, ...).
    #[error("invalid geometry: {0}")]
    InvalidGeometry(String),

    /// A linear system was numerically singular. Carries the factor name and
    /// a cheap reciprocal-condition estimate from the LU diagonal.
    #[error("singular matrix in {context} (rcond estimate {rcond:.3e})")]
    SingularMatrix { context: &'static str, rcond: f64 },

    /// The requested channel covariance is not positive semidefinite (or
    /// Cholesky failed even after jitter).
    #[error("invalid covariance: {0}")]
    InvalidCovariance(String),

    /// An all-zero channel draw; the Wiener scaling is undefined.
    #[error("degenerate channel: zero effective channel matrix")]
    DegenerateChannel,

    /// A per-amplifier output exceeded the saturation power of the
    /// non-linear amplifier model.
    #[error("amplifier {index} output {p_out:.6e} W exceeds saturation {p_sat:.6e} W")]
    SaturationViolation { index: usize, p_out: f64, p_sat: f64 },
}

pub type Result<T> = std::result::Result<T, Error>;
