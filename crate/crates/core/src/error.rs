use thiserror::Error;

/// Failures raised by the numerical routines.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    /// An argument lies outside the mathematical domain of the operation.
    #[error("domain error: {0}")]
    Domain(String),

    /// An argument is well defined but not accepted by this operation.
    #[error("invalid argument: {0}")]
    Argument(String),

    /// The discrete measure has fewer support points than the rule requires.
    #[error("measure has {support} support points but {required} are required")]
    Rank { support: usize, required: usize },

    /// Working precision is too low for the requested computation.
    #[error("precision insufficient at {bits} bits: {detail}")]
    Precision { bits: u32, detail: String },

    /// An iteration did not converge.
    #[error("no convergence in {routine} after {iterations} iterations: {detail}")]
    Convergence {
        routine: &'static str,
        iterations: usize,
        detail: String,
    },

    /// A structural property that must hold (a sign pattern, a zero count) failed.
    #[error("structural check failed: {0}")]
    Structure(String),
}

pub type Result<T> = std::result::Result<T, Error>;
