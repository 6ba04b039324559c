use thiserror::Error;

/// Errors raised by the simulation, estimation and key-rate pipeline.
#[derive(Debug, Error)]
pub enum Error {
    /// A parameter lies outside the domain where the formula is defined.
    #[error("domain error: {0}")]
    Domain(String),

    /// An argument violates a structural precondition (length, count, ...).
    #[error("invalid argument: {0}")]
    Argument(String),

    /// Alice's data carries no power, so the channel gain is undefined.
    #[error("singular input: {0}")]
    SingularInput(String),

    /// The estimated channel is degenerate (zero covariance, zero transmittance).
    #[error("degenerate channel: {0}")]
    DegenerateChannel(String),

    /// The confidence interval swallows the estimated gain; no key can be certified.
    #[error("insufficient statistics: {0}")]
    InsufficientStatistics(String),

    /// Roundoff pushed a discriminant or eigenvalue past its tolerance.
    #[error("numerical instability: {0}")]
    NumericalInstability(String),

    #[error("unphysical state: {0}")]
    UnphysicalState(String),

    #[error("unphysical symplectic eigenvalue: {0}")]
    UnphysicalEigenvalue(String),

    /// The sampling window does not cover the pulse support.
    #[error("support truncation: {0}")]
    SupportTruncation(String),

    #[error("pulse width estimation failed: {0}")]
    EstimationFailure(String),

    #[error("config error: {0}")]
    Config(String),

    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    /// Process exit status for the command-line front end.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config(_) | Error::Parse { .. } | Error::Argument(_) | Error::Domain(_) => 2,
            Error::NumericalInstability(_) => 3,
            Error::InsufficientStatistics(_) => 4,
            _ => 1,
        }
    }

    /// Short machine-readable name, used in CSV status columns.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::Domain(_) => "domain",
            Error::Argument(_) => "argument",
            Error::SingularInput(_) => "singular_input",
            Error::DegenerateChannel(_) => "degenerate_channel",
            Error::InsufficientStatistics(_) => "insufficient_statistics",
            Error::NumericalInstability(_) => "numerical_instability",
            Error::UnphysicalState(_) => "unphysical_state",
            Error::UnphysicalEigenvalue(_) => "unphysical_eigenvalue",
            Error::SupportTruncation(_) => "support_truncation",
            Error::EstimationFailure(_) => "estimation_failure",
            Error::Config(_) => "config",
            Error::Parse { .. } => "parse",
            Error::Io(_) => "io",
            Error::Csv(_) => "csv",
        }
    }
}

pub(crate) fn domain(msg: impl Into<String>) -> Error {
    Error::Domain(msg.into())
}

pub(crate) fn ensure_finite(name: &str, value: f64) -> Result<()> {
    if value.is_finite() {
        Ok(())
    } else {
        Err(domain(format!("{name} must be finite, got {value}")))
    }
}
