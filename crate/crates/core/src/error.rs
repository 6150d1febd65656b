use thiserror::Error;

/// Errors raised by law construction, the DP kernels, the solvers and the harness.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum PinError {
    #[error("excursion law is not summable: {0}")]
    NonSummable(String),

    #[error("invalid input: {0}")]
    InvalidSpec(String),

    #[error("numerical procedure did not converge: {0}")]
    NonConvergent(String),

    #[error("horizon exceeded: need p_n up to n = {needed}, law supplies {available}")]
    HorizonExceeded { needed: usize, available: usize },

    #[error("brute-force enumeration limited to N <= {max}, got {requested}")]
    TooLarge { requested: usize, max: usize },

    #[error("block scales are infeasible at desk scale (log K1 = {log_k1})")]
    InfeasibleScales { log_k1: f64 },

    #[error("scale fixed point has no solution: {0}")]
    NoSolution(String),

    #[error("critical-point bracket is inconclusive: {0}")]
    InconclusiveBracket(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("i/o error: {0}")]
    Io(String),
}

pub type Result<T> = std::result::Result<T, PinError>;

impl From<std::io::Error> for PinError {
    fn from(e: std::io::Error) -> Self {
        PinError::Io(e.to_string())
    }
}
