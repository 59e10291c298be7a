use std::path::PathBuf;

use serde::Serialize;

/// Everything that can stop a run.
#[derive(Debug, thiserror::Error)]
pub enum LabError {
    #[error(transparent)]
    Core(#[from] rcm_core::Error),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("malformed environment file {}: {reason}", path.display())]
    Format { path: PathBuf, reason: String },

    #[error("cannot access {}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

pub type LabResult<T> = Result<T, LabError>;

impl LabError {
    pub fn config(msg: impl Into<String>) -> Self {
        LabError::Config(msg.into())
    }

    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        LabError::Io {
            path: path.into(),
            source,
        }
    }

    /// 2 for invalid input, 3 for solver failure, 4 for a truncation breach.
    pub fn exit_code(&self) -> i32 {
        match self {
            LabError::Core(rcm_core::Error::NoConvergence { .. }) => 3,
            LabError::Core(rcm_core::Error::Truncation { .. }) => 4,
            _ => 2,
        }
    }

    pub fn kind(&self) -> &'static str {
        match self.exit_code() {
            3 => "numeric",
            4 => "truncation",
            _ => match self {
                LabError::Io { .. } => "io",
                _ => "validation",
            },
        }
    }

    pub fn report(&self, command: &str) -> ErrorReport {
        let details = match self {
            LabError::Core(e) => serde_json::to_value(CoreDetails::from(e)).unwrap_or_default(),
            _ => serde_json::Value::Null,
        };
        ErrorReport {
            command: command.to_string(),
            exit_code: self.exit_code(),
            kind: self.kind(),
            message: self.to_string(),
            details,
        }
    }
}

/// Machine-readable form of a failed run.
#[derive(Debug, Serialize)]
pub struct ErrorReport {
    pub command: String,
    pub exit_code: i32,
    pub kind: &'static str,
    pub message: String,
    pub details: serde_json::Value,
}

#[derive(Serialize)]
#[serde(tag = "error", rename_all = "snake_case")]
enum CoreDetails {
    NoConvergence {
        iterations: usize,
        residual_history: Vec<f64>,
    },
    Truncation {
        what: String,
        estimate: f64,
        threshold: f64,
    },
    MissingExterior {
        sites: Vec<Vec<i64>>,
    },
    Negative {
        time: f64,
        site: Vec<i64>,
        value: f64,
    },
    Other,
}

impl From<&rcm_core::Error> for CoreDetails {
    fn from(e: &rcm_core::Error) -> Self {
        use rcm_core::Error as E;
        match e {
            E::NoConvergence {
                iterations,
                residual_history,
            } => CoreDetails::NoConvergence {
                iterations: *iterations,
                residual_history: residual_history.clone(),
            },
            E::Truncation {
                what,
                estimate,
                threshold,
            } => CoreDetails::Truncation {
                what: what.clone(),
                estimate: *estimate,
                threshold: *threshold,
            },
            E::MissingExterior { sites } => CoreDetails::MissingExterior { sites: sites.clone() },
            E::Negative { time, site, value } => CoreDetails::Negative {
                time: *time,
                site: site.clone(),
                value: *value,
            },
            _ => CoreDetails::Other,
        }
    }
}
