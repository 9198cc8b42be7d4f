use std::path::PathBuf;

/// Errors produced anywhere in the calibration chain.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    /// An argument lies outside the domain of the operation.
    #[error("domain error: {0}")]
    Domain(String),

    /// A least-squares fit could not be carried out or did not converge.
    #[error("fit error: {0}")]
    Fit(String),

    /// A quadrature or iteration failed to reach its tolerance.
    #[error("numerical error: {message} (last relative change {last_change:.3e} after {steps} steps)")]
    Numerical {
        message: String,
        last_change: f64,
        steps: usize,
    },

    /// The run configuration is unreadable, incomplete or inconsistent.
    #[error("config error: {0}")]
    Config(String),

    /// An input table does not follow its schema.
    #[error("input error in {path}, line {line}: {message}")]
    Input {
        path: PathBuf,
        line: u64,
        message: String,
    },

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

pub(crate) fn domain<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::Domain(msg.into()))
}
