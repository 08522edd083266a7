use thiserror::Error;

/// Errors returned by this crate.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    /// A parameter violated its documented range.
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    /// A non-finite value reached an operation that requires finite input.
    #[error("non-finite value in {0}")]
    NonFinite(&'static str),

    /// The simulated pendulum rate exceeded the divergence bound.
    #[error("simulation diverged at t = {t} s (|phi_dot| = {phi_dot}); last valid index {last_valid}")]
    Diverged {
        last_valid: usize,
        t: f64,
        phi_dot: f64,
    },

    /// Both accelerometer components were zero, so gravity has no direction.
    #[error("gravity direction undefined: ax and ay are both zero")]
    ZeroGravityVector,

    #[error("sequence too short: length {len}, need at least {required}")]
    SequenceTooShort { len: usize, required: usize },

    #[error("insufficient history at index {index} for window {window}")]
    InsufficientHistory { index: usize, window: usize },

    #[error("sequences not aligned: {left} vs {right} samples")]
    LengthMismatch { left: usize, right: usize },

    /// The asin argument left [-1, 1] under the reject clamp policy.
    #[error("asin argument {value} out of range at sample {index}")]
    AsinOutOfRange { index: usize, value: f64 },

    #[error("no valid samples to evaluate")]
    EmptyValidRange,

    /// A cost evaluation returned a non-finite value.
    #[error("non-finite cost at parameters {point:?}")]
    NonFiniteCost { point: Vec<f64> },

    #[error("regularized Hessian is singular")]
    SingularHessian,

    #[error("matrix is not positive definite")]
    NotPositiveDefinite,

    #[error("time series is not uniformly sampled at record {index}")]
    NonUniformSampling { index: usize },

    #[error("missing required column `{0}`")]
    MissingColumn(&'static str),

    /// A CSV field failed to parse. `row` is 1-based and counts data rows.
    #[error("row {row}, column `{column}`: {message}")]
    Schema {
        row: usize,
        column: String,
        message: String,
    },

    #[error("i/o: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Error {
    Error::InvalidParameter {
        name,
        reason: reason.into(),
    }
}
