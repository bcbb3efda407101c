use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("contract violation: {0}")]
    Contract(String),
    #[error("domain error: {0}")]
    Domain(String),
    #[error("matrix exponential overflow (scaled norm {norm:e})")]
    Overflow { norm: f64 },
    #[error("non-finite value encountered in {0}")]
    NonFinite(String),
    #[error("Krylov projection did not converge (dimension {dim}, estimate {estimate:e})")]
    KrylovNotConverged { dim: usize, estimate: f64 },
    #[error("step failed at t = {t} (h = {h:e}){}: {reason}", partition.map(|p| format!(" in partition {}", p + 1)).unwrap_or_default())]
    StepFailure {
        t: f64,
        h: f64,
        partition: Option<usize>,
        reason: String,
    },
    #[error("step size underflow at t = {t} (h = {h:e}); problem too stiff for this method")]
    Stiffness { t: f64, h: f64 },
    #[error("unknown method '{name}'; available: {}", available.join(", "))]
    UnknownMethod { name: String, available: Vec<String> },
    #[error("unknown problem '{name}'; available: {}", available.join(", "))]
    UnknownProblem { name: String, available: Vec<String> },
    #[error("parse error: {0}")]
    Parse(String),
    #[error("reference solution unavailable: {0}")]
    Reference(String),
    #[error("I/O error: {0}")]
    Io(String),
}

impl Error {
    pub(crate) fn contract(msg: impl Into<String>) -> Self {
        Error::Contract(msg.into())
    }

    /// True for failures caused by the numerics rather than by bad input.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::Overflow { .. }
                | Error::NonFinite(_)
                | Error::KrylovNotConverged { .. }
                | Error::StepFailure { .. }
                | Error::Stiffness { .. }
                | Error::Reference(_)
        )
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}
