use thiserror::Error;

/// Errors produced by the library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("invalid time series: {0}")]
    InvalidSeries(String),

    #[error("matrix is not positive definite after jitter retries (smallest eigenvalue estimate {min_eigenvalue:e})")]
    IllConditioned { min_eigenvalue: f64 },

    #[error(
        "negative predictive variance {value:e} at query index {index} exceeds roundoff tolerance"
    )]
    NegativeVariance { index: usize, value: f64 },

    #[error("times are not on a Nyquist grid for bandwidth {delta}: {detail}")]
    GridMismatch { delta: f64, detail: String },

    #[error("kernel has unbounded spectral support; Nyquist spacing is undefined for `{0}`")]
    UnboundedSupport(String),

    #[error("non-finite objective at parameters {params:?}")]
    NonFiniteObjective { params: Vec<f64> },

    #[error("{path}:{line}: {message}")]
    Parse {
        path: String,
        line: usize,
        message: String,
    },

    #[error("duplicate time {0} in input")]
    DuplicateTime(f64),

    #[error("metrics do not match schema: {0}")]
    Schema(String),

    #[error("{context}: {source}")]
    Context {
        context: String,
        #[source]
        source: Box<Error>,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    /// Wraps the error with a description of what was being attempted.
    pub fn context(self, context: impl Into<String>) -> Self {
        Error::Context {
            context: context.into(),
            source: Box::new(self),
        }
    }

    /// True for failures of the numerics (as opposed to bad input).
    pub fn is_numerical(&self) -> bool {
        match self {
            Error::IllConditioned { .. }
            | Error::NegativeVariance { .. }
            | Error::NonFiniteObjective { .. } => true,
            Error::Context { source, .. } => source.is_numerical(),
            _ => false,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
