use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("domain error in {op}: {detail}")]
    Domain { op: &'static str, detail: String },

    #[error("chart mismatch: dimension {left} vs {right}")]
    ChartMismatch { left: usize, right: usize },

    #[error("invalid chart: {0}")]
    InvalidChart(String),

    #[error("degree error: {0}")]
    Degree(String),

    #[error("constraint violated: {0}")]
    Constraint(String),

    #[error("invalid connection: {0}")]
    InvalidConnection(String),

    #[error("precondition failed: {what} (residual {residual:.3e})")]
    PreconditionFailed { what: String, residual: f64 },

    #[error("no solution: {0}")]
    NoSolution(String),

    #[error("validation failed: {0}")]
    ValidationFailed(String),

    #[error("linear connection is not {kind}-regular: {detail}")]
    NotRegular { kind: &'static str, detail: String },

    #[error("type mismatch: {0}")]
    TypeMismatch(String),

    #[error("invalid form: {0}")]
    InvalidForm(String),

    #[error("not a spray: [C2,S] - S residual {0:.3e}")]
    NotSpray(f64),

    #[error("i_C2 Omega is not d_J2-closed (residual {0:.3e})")]
    ClosednessFailed(f64),

    #[error("form is singular at a sample point (|det| = {0:.3e})")]
    SingularForm(f64),

    #[error("a Finslerian form needs even n so that 3n is even; got n = {0}")]
    OddDimension(usize),

    #[error("schema error at {pointer}: {message}")]
    Schema { pointer: String, message: String },

    #[error("parse error: {0}")]
    Parse(String),

    #[error("io error: {0}")]
    Io(String),
}

impl Error {
    pub fn schema(pointer: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Schema { pointer: pointer.into(), message: message.into() }
    }

    pub(crate) fn domain(op: &'static str, detail: impl Into<String>) -> Self {
        Error::Domain { op, detail: detail.into() }
    }
}
