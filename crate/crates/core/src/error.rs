use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("parse error: {0}")]
    Parse(String),

    #[error("validation error at `{element}`: {message}")]
    Validation { element: String, message: String },

    #[error("unknown {kind} `{id}`")]
    UnknownId { kind: &'static str, id: String },

    #[error("{quantity} = {value} is outside its domain {domain}")]
    Domain {
        quantity: &'static str,
        value: f64,
        domain: &'static str,
    },

    #[error("assembly error at `{element}`: {message}")]
    Assembly { element: String, message: String },

    #[error("simulation did not converge after {iterations} iterations (residual {residual:.3e})")]
    NonConvergence { iterations: usize, residual: f64 },

    #[error("simulation produced a non-positive squared pressure at junction `{junction}`")]
    NegativePressure { junction: String },

    #[error("solution is not optimal (status {0})")]
    NotOptimal(String),

    #[error("invalid sweep specification: {0}")]
    Sweep(String),

    #[error("cannot read `{path}`: {message}")]
    File { path: String, message: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn validation(element: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Validation {
            element: element.into(),
            message: message.into(),
        }
    }

    /// Stable machine-readable code used by the CLI error records.
    pub fn code(&self) -> &'static str {
        match self {
            Error::Parse(_) => "parse",
            Error::Validation { .. } => "validation",
            Error::UnknownId { .. } => "unknown_id",
            Error::Domain { .. } => "domain",
            Error::Assembly { .. } => "assembly",
            Error::NonConvergence { .. } => "non_convergence",
            Error::NegativePressure { .. } => "negative_pressure",
            Error::NotOptimal(_) => "not_optimal",
            Error::Sweep(_) => "sweep_spec",
            Error::File { .. } | Error::Io(_) => "io",
            Error::Csv(_) => "csv",
            Error::Json(_) => "json",
        }
    }

    /// Offending element id, when the error names one.
    pub fn element(&self) -> Option<&str> {
        match self {
            Error::Validation { element, .. } | Error::Assembly { element, .. } => Some(element),
            Error::UnknownId { id, .. } => Some(id),
            Error::NegativePressure { junction } => Some(junction),
            Error::File { path, .. } => Some(path),
            _ => None,
        }
    }
}
