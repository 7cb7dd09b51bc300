use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("line {line}, column {column}: {message}")]
    Parse {
        line: usize,
        column: usize,
        message: String,
    },

    #[error("invalid network: {0}")]
    InvalidNetwork(String),

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("complex {0} does not lie in a terminal strongly connected component")]
    NotTerminal(usize),

    #[error("component is truncated by the state box, closedness is not certified")]
    TruncatedComponent,

    #[error("region contains no states")]
    EmptyRegion,

    /// A theorem's hypothesis does not hold for the given system.
    #[error("hypothesis of {theorem} not satisfied: {detail}")]
    Hypothesis {
        theorem: &'static str,
        detail: String,
    },

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("trajectory absorbed at t = {time} before burn-in {burn_in}")]
    AbsorbedBeforeBurnIn { time: f64, burn_in: f64 },

    #[error("box too small: {0}")]
    BoxTooSmall(String),

    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
}
