use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid {field}: {message}")]
    InvalidMap { field: &'static str, message: String },

    #[error("iterate left the double-precision chart (|x| or |y| > 1e100)")]
    EscapedNumeric,

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("operation not supported for {0} distributions")]
    UnsupportedKind(&'static str),

    #[error("orbit undecided after {iterations} iterations; partial Green estimate {partial}")]
    GreenIndeterminate { partial: f64, iterations: usize },

    #[error("tangent vector collapsed to zero; numeric fault")]
    Degenerate,

    #[error("every sampled orbit escaped (escaped fraction 1)")]
    AllEscaped,

    #[error("cluster {cluster} did not saturate within {rounds} rounds")]
    NonconvergentCluster { cluster: usize, rounds: usize },

    #[error("transition digraph is not strongly connected")]
    NotMinimal,

    #[error("point {0} lies in overlapping capture neighborhoods")]
    AmbiguousCapture(String),

    #[error("no resolvable range for the convergence-rate fit")]
    RateUnresolved,

    #[error("Neumann series terms did not decay within {0} terms")]
    SeriesStall(usize),

    #[error("empty point set")]
    EmptySet,

    #[error("{pointer}: {message}")]
    Config { pointer: String, message: String },

    #[error("i/o error: {0}")]
    Io(String),
}

impl Error {
    pub fn config(pointer: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Config { pointer: pointer.into(), message: message.into() }
    }

    /// Configuration problems exit with code 2, everything else with 3.
    pub fn is_config(&self) -> bool {
        matches!(self, Error::Config { .. } | Error::InvalidMap { .. })
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}
