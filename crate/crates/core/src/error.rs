use thiserror::Error;

/// Errors raised by the numerical core and the problem definitions.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {got} ({context})")]
    DimensionMismatch {
        expected: usize,
        got: usize,
        context: &'static str,
    },

    #[error("point outside the domain: {0}")]
    OutsideDomain(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("non-finite value in {0}")]
    NonFinite(&'static str),

    #[error("graph construction failed: {0}")]
    Graph(String),

    #[error("oracle did not converge: {0}")]
    NoConvergence(String),

    #[error("problem is infeasible: {0}")]
    Infeasible(String),

    #[error("bound regime mismatch: {0}")]
    RegimeMismatch(String),

    #[error("unsupported: {0}")]
    Unsupported(String),

    #[error("invariant violated at round {t}, agent {agent}: {detail}")]
    Invariant {
        t: usize,
        agent: usize,
        detail: String,
    },
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

pub(crate) fn check_len(expected: usize, got: usize, context: &'static str) -> Result<()> {
    if expected == got {
        Ok(())
    } else {
        Err(Error::DimensionMismatch {
            expected,
            got,
            context,
        })
    }
}
