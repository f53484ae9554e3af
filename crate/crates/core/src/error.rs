use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// Malformed or inconsistent input (dimension mismatch, bad parameter).
    #[error("invalid input: {0}")]
    Input(String),

    /// The operation is not available for this kind of instance.
    #[error("unsupported: {0}")]
    Unsupported(String),

    #[error("linear solve failed: {0}")]
    SolverFailure(String),

    /// A computed reference did not pass its own optimality check.
    #[error("verification failed: {0}")]
    Verification(String),

    #[error("time {t} lies before the curve start t0 = {t0}")]
    BeforeStart { t: f64, t0: f64 },

    #[error("non-finite state encountered at t = {t}")]
    PoisonedState { t: f64 },

    #[error("step budget of {max_steps} steps exhausted at t = {t}")]
    StepBudget { max_steps: usize, t: f64 },

    #[error("step size {h:e} underflowed at t = {t} (problem too stiff for an explicit method)")]
    StepUnderflow { t: f64, h: f64 },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn input(msg: impl Into<String>) -> Self {
        Error::Input(msg.into())
    }
}

/// Process exit status for an invalid specification.
pub const EXIT_INVALID_SPEC: i32 = 2;
/// Process exit status for a failed integration.
pub const EXIT_INTEGRATION: i32 = 3;

impl Error {
    /// Exit status the command-line front end reports for this error.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::PoisonedState { .. }
            | Error::StepBudget { .. }
            | Error::StepUnderflow { .. } => EXIT_INTEGRATION,
            Error::Io(_) => 1,
            _ => EXIT_INVALID_SPEC,
        }
    }
}
