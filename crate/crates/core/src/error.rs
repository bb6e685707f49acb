use thiserror::Error;

/// Errors produced by the library.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("size limit exceeded: {what} has cardinality {cardinality}, cap is {cap}")]
    SizeLimit {
        what: &'static str,
        cardinality: u128,
        cap: u128,
    },

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("{0} is not prime")]
    NotPrime(u64),

    #[error("2m-1 = {candidate} is not prime for m = {m}; nearest valid point counts are {below:?} and {above}")]
    NoModulus {
        m: u64,
        candidate: u64,
        below: Option<u64>,
        above: u64,
    },

    #[error("coordinate {value} lies outside [-1, 1]")]
    Domain { value: f64 },

    #[error("{value} lies outside the basis domain [{lo}, {hi}]")]
    OutOfBasisDomain { value: f64, lo: f64, hi: f64 },

    #[error("degenerate column {column} ({label}) has norm {norm:e}")]
    DegenerateColumn {
        column: usize,
        label: String,
        norm: f64,
    },

    #[error("inapplicable: {0}")]
    Inapplicable(String),

    #[error("malformed input: {0}")]
    Parse(String),

    #[error("i/o error: {0}")]
    Io(String),
}

impl Error {
    /// Short machine-readable tag for the error variant.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::SizeLimit { .. } => "size_limit",
            Error::DimensionMismatch { .. } => "dimension_mismatch",
            Error::InvalidArgument(_) => "invalid_argument",
            Error::NotPrime(_) => "not_prime",
            Error::NoModulus { .. } => "no_modulus",
            Error::Domain { .. } => "domain",
            Error::OutOfBasisDomain { .. } => "out_of_domain",
            Error::DegenerateColumn { .. } => "degenerate_column",
            Error::Inapplicable(_) => "inapplicable",
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

impl From<csv::Error> for Error {
    fn from(e: csv::Error) -> Self {
        Error::Parse(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
