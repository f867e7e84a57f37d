use thiserror::Error;

/// Failure modes shared by every module.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("value out of range: {0}")]
    Range(String),

    #[error("quadrature did not converge: estimate {estimate:e}, error estimate {err_estimate:e} after {panels} panels")]
    NonConvergence {
        estimate: f64,
        err_estimate: f64,
        panels: usize,
    },

    #[error("integration window too small: {0}")]
    Window(String),

    #[error("operator is singular: {0}")]
    Singular(String),

    #[error("1 + f(x) is not positive at x = {x}")]
    LogDomain { x: f64 },
}

impl Error {
    /// True for the numerical (as opposed to input-validation) failures.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::NonConvergence { .. } | Error::Window(_) | Error::Singular(_) | Error::LogDomain { .. }
        )
    }
}

pub type Result<T> = std::result::Result<T, Error>;
