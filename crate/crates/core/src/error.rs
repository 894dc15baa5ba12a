use thiserror::Error;

/// Errors raised by the numerical routines.
#[derive(Debug, Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),
    #[error("invalid hamiltonian: {0}")]
    Validation(String),
    #[error("no convergence: {what} (last diameter {last:e})")]
    Convergence { what: String, last: f64 },
    #[error("unsupported: {0}")]
    Unsupported(String),
    #[error("spectral positivity violated: {0}")]
    Positivity(String),
    #[error("factorization failed: {0}")]
    Factorization(String),
    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Coarse classification used by the CLI to pick exit codes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorKind {
    Parse,
    Domain,
    Convergence,
}

impl Error {
    pub fn kind(&self) -> ErrorKind {
        match self {
            Error::Parse { .. } => ErrorKind::Parse,
            Error::Convergence { .. } => ErrorKind::Convergence,
            _ => ErrorKind::Domain,
        }
    }

    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
