use alloc::string::String;
use alloc::vec::Vec;

pub type Result<T, E = Error> = core::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("invalid edge {x:?} -- {y:?}: {reason}")]
    InvalidEdge { x: Vec<i64>, y: Vec<i64>, reason: String },

    #[error("site {site:?} has no positive conductance (pi = 0)")]
    IsolatedSite { site: Vec<i64> },

    #[error("operation requires a torus environment")]
    NotTorus,

    #[error("field has {got} values but the environment has {expected} sites")]
    FieldMismatch { expected: usize, got: usize },

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("exterior data missing at {} reachable site(s), first {:?}", sites.len(), sites.first())]
    MissingExterior { sites: Vec<Vec<i64>> },

    #[error("function is negative ({value:e}) at time {time} on site {site:?}")]
    Negative { time: f64, site: Vec<i64>, value: f64 },

    #[error("conjugate gradients did not converge in {iterations} iterations (relative residual {})", residual_history.last().copied().unwrap_or(f64::NAN))]
    NoConvergence {
        iterations: usize,
        residual_history: Vec<f64>,
    },

    #[error("truncation estimate {estimate:e} exceeds threshold {threshold:e}: {what}")]
    Truncation {
        what: String,
        estimate: f64,
        threshold: f64,
    },
}

impl Error {
    pub(crate) fn param(name: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            name,
            reason: reason.into(),
        }
    }

    pub(crate) fn pre(msg: impl Into<String>) -> Self {
        Error::Precondition(msg.into())
    }
}
