use thiserror::Error;

/// Failure modes shared by every solver in the crate.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    Argument(String),
    #[error("cannot construct operator: {0}")]
    Construction(String),
    #[error("outside of domain: {0}")]
    Domain(String),
    #[error("capacity exceeded: {what} needs {required} (budget {budget})")]
    Capacity {
        what: String,
        required: usize,
        budget: usize,
    },
    #[error("no convergence: {message} (residuals: {residuals:?})")]
    Convergence {
        message: String,
        residuals: Vec<f64>,
    },
    #[error("insufficient resolution: {0}")]
    Resolution(String),
    #[error("linear algebra backend failed: {0}")]
    LinAlg(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error("malformed data: {0}")]
    Format(String),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn argument<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::Argument(msg.into()))
}
