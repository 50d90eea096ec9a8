use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("dimension mismatch: {what} has length {got}, expected {expected}")]
    Dimension {
        what: &'static str,
        got: usize,
        expected: usize,
    },
    #[error("invalid instance: {0}")]
    InvalidInstance(String),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("correlation C[{i}][{j}] is zero; the control channel needs strictly positive correlations")]
    ZeroCorrelation { i: usize, j: usize },
    #[error("initial state x[{index}] = {value} is not in the open unit interval")]
    BoundaryStart { index: usize, value: f64 },
    #[error("{0}")]
    Unsupported(String),
    #[error("malformed JSON: {0}")]
    Parse(String),
}
