use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: {left_w}x{left_h} vs {right_w}x{right_h}")]
    DimensionMismatch {
        left_w: u32,
        left_h: u32,
        right_w: u32,
        right_h: u32,
    },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("unknown operator `{id}` (valid ids: {valid})")]
    UnknownOperator { id: String, valid: String },

    #[error("unknown {kind} `{name}` (valid: {valid})")]
    UnknownStrategy {
        kind: &'static str,
        name: String,
        valid: String,
    },

    #[error("operator registry mismatch: {0}")]
    RegistryMismatch(String),

    #[error("need more than {features} samples to fit, got {samples}")]
    InsufficientSamples { samples: usize, features: usize },

    #[error("scorer transport error: {0}")]
    Transport(String),

    #[error("scorer failed on plan {plan_index}: {source}")]
    PlanScoring {
        plan_index: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("invalid probability vector: {0}")]
    InvalidProbs(String),

    #[error("{path}:{line}: {message}")]
    Parse {
        path: String,
        line: usize,
        message: String,
    },

    #[error("image error for {path}: {message}")]
    Image { path: PathBuf, message: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn dims(a: (u32, u32), b: (u32, u32)) -> Self {
        Error::DimensionMismatch {
            left_w: a.0,
            left_h: a.1,
            right_w: b.0,
            right_h: b.1,
        }
    }

    /// True when the failure came from talking to a scorer rather than from
    /// the input data or the pipeline itself.
    pub fn is_transport(&self) -> bool {
        match self {
            Error::Transport(_) | Error::InvalidProbs(_) => true,
            Error::PlanScoring { source, .. } => source.is_transport(),
            _ => false,
        }
    }
}
