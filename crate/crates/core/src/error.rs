use thiserror::Error;

/// Errors raised by the numerical engines and the study harness.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("continued fraction for the incomplete beta function did not converge after {iterations} iterations (x = {x}, a = {a}, b = {b})")]
    ContinuedFraction { iterations: usize, x: f64, a: f64, b: f64 },

    #[error("adaptive quadrature did not reach tolerance {tolerance:e} (estimated error {estimate:e})")]
    Quadrature { tolerance: f64, estimate: f64 },

    #[error("outcome space has {outcomes} vectors, above the exact-enumeration ceiling of {ceiling}; use the Monte-Carlo backend")]
    OutcomeSpaceTooLarge { outcomes: u128, ceiling: u128 },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("unknown scenario set `{0}`")]
    UnknownScenarioSet(String),

    #[error("io error: {0}")]
    Io(String),
}

impl Error {
    /// True for failures of the numerical kernels (continued fraction or quadrature).
    pub fn is_numeric(&self) -> bool {
        matches!(self, Error::ContinuedFraction { .. } | Error::Quadrature { .. })
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

impl From<csv::Error> for Error {
    fn from(e: csv::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
