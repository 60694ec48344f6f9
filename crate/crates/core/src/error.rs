use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid exponent: {0}")]
    InvalidExponent(String),

    #[error("critical Sobolev exponent undefined: harmonic mean {p_bar} is not below dimension {n_dims}")]
    UndefinedCriticalExponent { p_bar: f64, n_dims: usize },

    #[error("invalid norm indices: {0}")]
    InvalidIndices(String),

    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("invalid field: {0}")]
    InvalidField(String),

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("flux derivative is singular at zero gradient on axis {axis} (p = {p})")]
    SingularDerivative { axis: usize, p: f64 },

    #[error("Newton solve did not converge: residual {residual:e} after {iterations} iterations")]
    StepFailure { residual: f64, iterations: usize },

    #[error("solver failed at t = {time}: {source}")]
    SolveFailure {
        time: f64,
        #[source]
        source: Box<Error>,
    },

    #[error("elliptic solve did not converge: residual {residual:e}")]
    NonConvergence { residual: f64 },

    #[error("mismatched runs: {0}")]
    MismatchedRuns(String),

    #[error("insufficient data: {0}")]
    InsufficientData(String),

    #[error("forcing is not autonomous")]
    NonAutonomous,

    #[error("format error: {0}")]
    Format(String),

    #[error("io error: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
