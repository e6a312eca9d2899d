use thiserror::Error;

/// Errors produced anywhere in the simulator.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("capacity exceeded: {what} is {requested}, limit is {limit}")]
    Capacity {
        what: &'static str,
        requested: usize,
        limit: usize,
    },

    #[error("invalid Pauli character {0:?} (expected one of I, X, Y, Z)")]
    InvalidPauliChar(char),

    #[error("identity string is not allowed here")]
    IdentityString,

    #[error("non-finite value: {0}")]
    NonFinite(&'static str),

    #[error("numeric underflow: {0}")]
    Underflow(String),

    #[error("invalid graph: {0}")]
    InvalidGraph(String),

    #[error("domain size invalid for {method}: {reason}")]
    InvalidDomain {
        method: &'static str,
        reason: String,
    },

    #[error("unsupported method: {0}")]
    UnsupportedMethod(String),

    #[error("linear solve failed: {0}")]
    Solver(String),

    #[error("hamiltonian is not diagonal in the computational basis")]
    NonDiagonal,

    #[error("invalid noise model: {0}")]
    InvalidNoise(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("parse error: {0}")]
    Parse(String),

    #[error("i/o error: {0}")]
    Io(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    /// True for errors caused by numerical breakdown rather than bad input.
    pub fn is_numeric(&self) -> bool {
        matches!(
            self,
            Error::Underflow(_) | Error::Solver(_) | Error::NonFinite(_)
        )
    }

    /// Stable snake_case tag for machine-readable reports.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::DimensionMismatch { .. } => "dimension_mismatch",
            Error::Capacity { .. } => "capacity",
            Error::InvalidPauliChar(_) => "invalid_pauli_char",
            Error::IdentityString => "identity_string",
            Error::NonFinite(_) => "non_finite",
            Error::Underflow(_) => "underflow",
            Error::InvalidGraph(_) => "invalid_graph",
            Error::InvalidDomain { .. } => "invalid_domain",
            Error::UnsupportedMethod(_) => "unsupported_method",
            Error::Solver(_) => "solver",
            Error::NonDiagonal => "non_diagonal",
            Error::InvalidNoise(_) => "invalid_noise",
            Error::InvalidArgument(_) => "invalid_argument",
            Error::Parse(_) => "parse",
            Error::Io(_) => "io",
        }
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}
