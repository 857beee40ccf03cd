use thiserror::Error;

/// Every failure the library can report.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid polynomial degree {0}, need at least 1")]
    InvalidDegree(usize),

    #[error("config error at line {line}: {msg}")]
    ConfigLine { line: usize, msg: String },

    #[error("config error: {0}")]
    Config(String),

    #[error("dimension mismatch in {what}: expected {expected}, got {got}")]
    Dimension {
        what: &'static str,
        expected: usize,
        got: usize,
    },

    #[error("singular matrix: pivot {pivot:e} in column {col}")]
    Singular { col: usize, pivot: f64 },

    #[error("{what} did not converge after {iterations} iterations (residual {residual:e})")]
    Convergence {
        what: &'static str,
        iterations: usize,
        residual: f64,
        history: Vec<f64>,
    },

    #[error("degenerate state: {0}")]
    Degenerate(String),

    #[error("outside thermodynamic domain: {0}")]
    Thermodynamic(String),

    #[error("startup error: {0}")]
    Startup(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    /// Process exit code used by the command line driver.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::ConfigLine { .. } | Error::Config(_) | Error::InvalidDegree(_) => 1,
            _ => 2,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
