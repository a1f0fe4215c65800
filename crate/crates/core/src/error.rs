use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("q = {q:?} outside the declared domain: coordinate {index} = {value} not in [{lower}, {upper}]")]
    Domain {
        q: Vec<f64>,
        index: usize,
        value: f64,
        lower: f64,
        upper: f64,
    },

    #[error("singular {what} at q = {q:?}")]
    Singular { what: &'static str, q: Vec<f64> },

    #[error("dimension mismatch in {context}: expected {expected}, got {got}")]
    Dimension {
        context: &'static str,
        expected: usize,
        got: usize,
    },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("kinematic branch: {0}")]
    Kinematics(String),

    #[error("tuning function: {0}")]
    Tuning(String),

    #[error("inadmissible feedback: {constraint} violated by {violation:e}")]
    Inadmissible {
        constraint: &'static str,
        violation: f64,
    },

    #[error(
        "no nondegenerate symmetric solution found after {attempts} sweep candidates \
         (solution space dimension {dimension})"
    )]
    NoNondegenerateSolution {
        attempts: usize,
        dimension: usize,
        basis: Vec<Vec<f64>>,
    },

    #[error("configuration: {0}")]
    Config(String),

    #[error("i/o: {0}")]
    Io(String),
}

impl Error {
    pub fn is_domain(&self) -> bool {
        matches!(self, Error::Domain { .. })
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        Error::Config(e.to_string())
    }
}

impl From<csv::Error> for Error {
    fn from(e: csv::Error) -> Self {
        Error::Io(e.to_string())
    }
}
