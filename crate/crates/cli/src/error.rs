use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("convergence error: {0}")]
    Convergence(String),
    #[error("capacity error: {0}")]
    Capacity(String),
    #[error("validation failed: {0}")]
    Validation(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Convergence(_) => 3,
            CliError::Capacity(_) => 4,
            CliError::Validation(_) | CliError::Io(_) => 1,
        }
    }
}

impl From<doublewell::Error> for CliError {
    fn from(e: doublewell::Error) -> Self {
        use doublewell::Error as E;
        match e {
            E::Capacity { .. } => CliError::Capacity(e.to_string()),
            E::Convergence { .. } | E::Resolution(_) | E::LinAlg(_) | E::Domain(_) => CliError::Convergence(e.to_string()),
            E::Io(io) => CliError::Io(io),
            E::Argument(_) | E::Construction(_) | E::Format(_) => CliError::Config(e.to_string()),
        }
    }
}

pub type Result<T> = std::result::Result<T, CliError>;
