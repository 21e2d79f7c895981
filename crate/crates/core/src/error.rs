use thiserror::Error;

/// Errors raised by the library.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    /// Malformed arguments: dimension mismatches, bad intervals, unknown names.
    #[error("input error: {0}")]
    Input(String),
    /// Parameters that violate a model or potential constraint.
    #[error("configuration error: {0}")]
    Config(String),
    /// An iterative solve did not reach its tolerance.
    #[error("numerical error: {message} (residual {residual:.3e} after {iterations} iterations)")]
    Numerical {
        message: String,
        residual: f64,
        iterations: usize,
    },
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn input(msg: impl Into<String>) -> Self {
        Error::Input(msg.into())
    }

    pub(crate) fn config(msg: impl Into<String>) -> Self {
        Error::Config(msg.into())
    }

    pub(crate) fn numerical(msg: impl Into<String>, residual: f64, iterations: usize) -> Self {
        Error::Numerical {
            message: msg.into(),
            residual,
            iterations,
        }
    }
}

pub(crate) fn check_dim(what: &str, expected: usize, got: usize) -> Result<()> {
    if expected != got {
        return Err(Error::input(format!(
            "{what}: expected dimension {expected}, got {got}"
        )));
    }
    Ok(())
}
