use thiserror::Error;

/// Errors shared across the crate.
#[derive(Debug, Error)]
pub enum Error {
    /// Invalid configuration: bad parameters, unsupported combinations,
    /// malformed config files.
    #[error("configuration error: {0}")]
    Config(String),

    /// Input outside the mathematical domain of an operation
    /// (cut locus, conjugate points, rank deficiency, ...).
    #[error("domain error: {0}")]
    Domain(String),

    /// A precondition on the inputs was violated.
    #[error("precondition error: {0}")]
    Precondition(String),

    /// The backtracking line-search hit its shrink cap while the gradient
    /// was still above tolerance.
    #[error("line-search failure at iteration {iter}: step size reached {alpha:e} after {shrinks} shrinks")]
    LineSearchFailure {
        iter: usize,
        alpha: f64,
        shrinks: u32,
    },

    /// The proximal inner solver stagnated before reaching its tolerance.
    #[error("inner solver failure at outer iteration {iter}: residual {residual:e} after {inner_iters} inner iterations")]
    InnerSolverFailure {
        iter: usize,
        residual: f64,
        inner_iters: usize,
    },

    /// I/O failure while reading configs or writing artifacts.
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    /// Malformed JSON in a config file.
    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub fn config(msg: impl Into<String>) -> Self {
        Error::Config(msg.into())
    }

    pub fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }

    pub fn precondition(msg: impl Into<String>) -> Self {
        Error::Precondition(msg.into())
    }
}
