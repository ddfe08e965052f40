use std::path::PathBuf;

use serde_json::json;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(String),

    #[error("numeric failure: {0}")]
    Numeric(flowlab::Error),

    #[error("numeric failure: {0}")]
    Threshold(String),

    #[error("i/o error on {}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl From<flowlab::Error> for CliError {
    fn from(e: flowlab::Error) -> Self {
        use flowlab::Error as E;
        match e {
            E::Parse { .. }
            | E::UnknownEntry(_)
            | E::ExponentMismatch { .. }
            | E::NonpositiveDelta(_)
            | E::InvalidRadii { .. }
            | E::InvalidArgument(_)
            | E::DimensionMismatch { .. }
            | E::WindowMismatch(_)
            | E::RegionEmpty(_)
            | E::NoFlowOracle(_)
            | E::NoAnalyticJacobian(_) => Self::Config(e.to_string()),
            other => Self::Numeric(other),
        }
    }
}

impl CliError {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Self::Io {
            path: path.into(),
            source,
        }
    }

    pub fn kind(&self) -> &'static str {
        match self {
            Self::Config(_) => "config",
            Self::Numeric(_) | Self::Threshold(_) => "numeric",
            Self::Io { .. } => "io",
        }
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            Self::Config(_) => 2,
            Self::Numeric(_) | Self::Threshold(_) => 3,
            Self::Io { .. } => 4,
        }
    }

    /// Single-line JSON record for stderr.
    pub fn record(&self) -> String {
        json!({
            "error": {
                "kind": self.kind(),
                "code": self.exit_code(),
                "message": self.to_string(),
            }
        })
        .to_string()
    }
}
