/// Errors shared by every module in this crate.
///
/// The three variants deliberately mirror the three failure classes a caller
/// has to tell apart: bad arguments, model hypotheses that do not hold for an
/// otherwise well-formed input, and iterative routines that ran out of
/// budget. The command-line frontend maps them to distinct exit codes.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    /// The input is malformed: wrong length, out of range, inconsistent
    /// pieces, or a quantity outside its documented domain.
    #[error("invalid input: {0}")]
    InvalidInput(String),

    /// The input parses but violates a structural hypothesis of the model,
    /// e.g. a map labelled as a dilation that does not expand, or a switch
    /// point outside the superposition region.
    #[error("hypothesis violated: {0}")]
    Hypothesis(String),

    /// An iterative routine failed to reach its tolerance within the allowed
    /// number of iterations. Carries the last residual so callers can judge
    /// how far convergence was.
    #[error("no convergence after {iterations} iterations (last residual {residual:e})")]
    NoConvergence { iterations: usize, residual: f64 },
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidInput(msg.into())
    }

    pub fn hypothesis(msg: impl Into<String>) -> Self {
        Error::Hypothesis(msg.into())
    }
}
