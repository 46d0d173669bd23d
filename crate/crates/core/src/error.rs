use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    /// An argument was outside the domain of the operation.
    #[error("domain error: {0}")]
    Domain(String),

    #[error(
        "integration did not reach tolerance {tolerance:e} within {evaluations} evaluations \
         (estimate {estimate}, error bound {error:e})"
    )]
    Convergence {
        tolerance: f64,
        evaluations: usize,
        estimate: f64,
        error: f64,
    },

    #[error("root is not bracketed on [{lo}, {hi}] (f(lo) = {f_lo}, f(hi) = {f_hi})")]
    Bracket { lo: f64, hi: f64, f_lo: f64, f_hi: f64 },

    #[error("replicate {replicate} of cell {cell} failed (master seed {seed}): {message}")]
    Replicate {
        seed: u64,
        cell: u64,
        replicate: u64,
        message: String,
    },
}

impl Error {
    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }

    /// True for failures of the numerical machinery (as opposed to bad input).
    pub fn is_numerical(&self) -> bool {
        !matches!(self, Error::Domain(_))
    }
}
