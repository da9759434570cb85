use alloc::boxed::Box;
use alloc::string::String;

pub type Result<T, E = Error> = core::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    /// The QL iteration did not converge within its sweep budget.
    #[error("tridiagonal eigensolver did not converge: size {size}, eigenvalue {index} after {iterations} sweeps")]
    NoConvergence {
        size: usize,
        index: usize,
        iterations: usize,
    },

    #[error("invalid argument `{name}`: {reason}")]
    InvalidArgument { name: &'static str, reason: String },

    /// A closed-form measure left its admissible range by more than rounding.
    #[error("internal consistency failure: {0}")]
    Consistency(String),

    #[error("realization {index} failed: {source}")]
    Realization { index: usize, source: Box<Error> },

    #[error("ensemble aborted after {completed} completed realizations: {source}")]
    EnsembleAborted {
        completed: usize,
        source: Box<Error>,
    },

    #[error("least-squares normal equations are singular (condition estimate {condition:e})")]
    SingularFit { condition: f64 },

    #[error("not enough fit data: {points} points for {free} free parameters (need {required})")]
    InsufficientData {
        points: usize,
        free: usize,
        required: usize,
    },
}

impl Error {
    pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidArgument {
            name,
            reason: reason.into(),
        }
    }
}
