use thiserror::Error;

/// Errors raised by the pricing library.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("state is on the kernel singularity: {0}")]
    Singularity(String),

    #[error("quadrature did not converge: best estimate {best} with error estimate {err_est}")]
    Convergence { best: f64, err_est: f64 },

    #[error("unsupported model: {0}")]
    UnsupportedModel(String),

    #[error("no-arbitrage violation at maturity {maturity}: {reason}")]
    Calibration { maturity: f64, reason: String },

    #[error("constraint violated: {0}")]
    Constraint(String),

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("degenerate input: {0}")]
    Degenerate(String),

    #[error("unknown currency `{0}`")]
    Lookup(String),

    #[error("invalid parameters: {0}")]
    InvalidParams(String),

    #[error("input error: {0}")]
    Input(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }

    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidParams(msg.into())
    }
}
