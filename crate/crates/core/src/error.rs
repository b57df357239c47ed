use thiserror::Error;

use crate::market_data::Date;

pub type Result<T> = std::result::Result<T, Error>;

/// Every fallible operation in the crate reports one of these.
#[derive(Debug, Error)]
pub enum Error {
    #[error("dates out of order: {start} is after {end}")]
    DateOrder { start: Date, end: Date },

    #[error("invalid date '{0}', expected YYYYMMDD")]
    DateParse(String),

    #[error("{curve} curve cannot be evaluated at {date}: outside pillar range [{first}, {last}]")]
    Extrapolation {
        curve: &'static str,
        date: Date,
        first: Date,
        last: Date,
    },

    #[error("invalid {what}: {reason}")]
    InvalidInput { what: String, reason: String },

    #[error("domain error in {op}: {reason}")]
    Domain { op: &'static str, reason: String },

    #[error("parameter vector has length {actual}, surface expects {expected}")]
    Shape { expected: usize, actual: usize },

    #[error("date {date} is not on the {grid} time grid")]
    OffGrid { grid: &'static str, date: Date },

    #[error("degenerate grid at slice {slice}: {reason}")]
    DegenerateGrid { slice: usize, reason: String },

    #[error("non-finite state on path {path} at step {step}")]
    NonFinitePath { path: usize, step: usize },

    #[error("missing fixing for {date} in deal {deal}")]
    MissingFixing { deal: String, date: Date },

    #[error("pricing failed for instrument {instrument}: {source}")]
    Instrument {
        instrument: String,
        #[source]
        source: Box<Error>,
    },

    #[error("jacobian column {column}: {source}")]
    JacobianColumn {
        column: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("calibration could not start: {0}")]
    Initialization(String),

    #[error("{path}: {message}")]
    Parse { path: String, message: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn invalid(what: impl Into<String>, reason: impl Into<String>) -> Self {
        Error::InvalidInput {
            what: what.into(),
            reason: reason.into(),
        }
    }

    pub(crate) fn domain(op: &'static str, reason: impl Into<String>) -> Self {
        Error::Domain {
            op,
            reason: reason.into(),
        }
    }
}
