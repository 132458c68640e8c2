use thiserror::Error;

/// Errors produced by the simulation, fitting and I/O layers.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("reference integration did not converge: step halving changed the state by {change:.3e} (tolerance {tolerance:.1e})")]
    NonConvergence { change: f64, tolerance: f64 },

    #[error("Stark window violates the guard at sample(s) {indices:?}")]
    GuardViolation { indices: Vec<usize> },

    #[error("trace is not modulated: {0}")]
    NotModulated(String),

    #[error("trace too short: spans {periods:.2} modulation periods, need at least {required}")]
    TooShort { periods: f64, required: f64 },

    #[error("fit did not converge after {iterations} iterations")]
    FitNonConvergence { iterations: usize },

    #[error("config: {0}")]
    Config(String),

    #[error("csv: {0}")]
    Csv(String),

    #[error("record: {0}")]
    Record(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    /// Stable machine-readable kind tag for error records.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::InvalidInput(_) => "invalid_input",
            Error::NonConvergence { .. } => "non_convergence",
            Error::GuardViolation { .. } => "guard_violation",
            Error::NotModulated(_) => "not_modulated",
            Error::TooShort { .. } => "too_short",
            Error::FitNonConvergence { .. } => "fit_non_convergence",
            Error::Config(_) => "config",
            Error::Csv(_) => "csv",
            Error::Record(_) => "record",
            Error::Io(_) => "io",
        }
    }
}

impl From<csv::Error> for Error {
    fn from(e: csv::Error) -> Self {
        Error::Csv(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidInput(msg.into())
}
