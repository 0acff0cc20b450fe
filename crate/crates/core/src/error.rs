use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("parse error in {source_name}{}: {message}", line.map(|l| format!(" at line {l}")).unwrap_or_default())]
    Parse { source_name: String, line: Option<usize>, message: String },

    #[error("validation failed: {0}")]
    Validation(String),

    #[error("g-code machine state error at line {line}: {message}")]
    State { line: usize, message: String },

    #[error("query point lies inside the polytope")]
    PointInsidePolytope,

    #[error("reference point at horizon step {step} lies within inflated obstacle {obstacle}")]
    ReferenceInsideObstacle { step: usize, obstacle: usize },

    #[error("malformed print event stream: {0}")]
    MalformedEventStream(String),

    #[error("calibration is degenerate: disturbance integral {0:.3e} is too small to identify gains")]
    DegenerateCalibration(f64),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io { path: path.into(), source }
    }

    pub(crate) fn validation(msg: impl Into<String>) -> Self {
        Error::Validation(msg.into())
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
