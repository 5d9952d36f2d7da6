use alloc::string::String;

/// Errors raised by the core solvers and model types.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("dimension mismatch for {what}: expected {expected}, found {found}")]
    DimensionMismatch {
        what: &'static str,
        expected: usize,
        found: usize,
    },

    #[error("invalid generator: {0}")]
    InvalidGenerator(String),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("non-finite {quantity} at iteration {iteration}")]
    NonFinite {
        quantity: &'static str,
        iteration: usize,
    },

    #[error("loss kind has no closed-form exact w-minimizer")]
    UnsupportedLoss,

    #[error("exact w-minimization requires R = 0")]
    UnsupportedRegularizer,

    #[error("trace is degenerate: {0}")]
    DegenerateTrace(&'static str),

    #[error("invalid instance specification: {0}")]
    InvalidInstance(String),
}

pub(crate) fn check_dim(what: &'static str, expected: usize, found: usize) -> Result<(), Error> {
    if expected == found {
        Ok(())
    } else {
        Err(Error::DimensionMismatch {
            what,
            expected,
            found,
        })
    }
}
