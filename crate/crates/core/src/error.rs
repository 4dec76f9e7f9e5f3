use thiserror::Error;

pub type Result<T> = std::result::Result<T, MgtError>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MgtError {
    #[error("invalid parameter: {0}")]
    Parameter(String),
    #[error("inadmissible kernel: mass {kappa} is not below gamma = {gamma}")]
    Inadmissible { kappa: f64, gamma: f64 },
    #[error("wrong stability regime: {0}")]
    Regime(String),
    #[error("numerical failure: {0}")]
    Numerical(String),
    #[error("insufficient resolution: {0}")]
    Resolution(String),
    #[error("out of range: {0}")]
    Range(String),
    #[error("history is not in the generator domain: {0}")]
    DomainViolation(String),
    #[error("grid mismatch: {0}")]
    GridMismatch(String),
    #[error("missing precondition: {0}")]
    Precondition(String),
    #[error("decay fit failed: {0}")]
    Fit(String),
    #[error("i/o: {0}")]
    Io(String),
}

impl MgtError {
    pub(crate) fn param(msg: impl Into<String>) -> Self {
        MgtError::Parameter(msg.into())
    }
}
