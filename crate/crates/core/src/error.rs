use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("index {index} out of range for cloud of {len} points")]
    IndexOutOfRange { index: usize, len: usize },

    #[error("point cloud is empty")]
    EmptyCloud,

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("stage {stage} exceeds the configured cap {cap}")]
    StageOverCap { stage: u32, cap: u32 },

    #[error("no state outside the ball; the walk never exits")]
    NoExit,

    #[error("linear solve failed to converge after {iterations} iterations (relative residual {residual:e})")]
    Singular { iterations: usize, residual: f64 },

    #[error("a sample path exceeded the step cap of {cap}")]
    PathCap { cap: u64 },

    #[error("scale window too narrow: {0}")]
    WindowTooNarrow(String),

    #[error("ball around state {0} carries no mass")]
    EmptyBall(usize),

    #[error("cover scale {delta} is below three times the cloud resolution ({min})")]
    DeltaTooSmall { delta: f64, min: f64 },

    #[error("ball complement carries no mass")]
    EmptyComplement,

    #[error("the r-ball graph over the cloud is disconnected ({components} components)")]
    Disconnected { components: usize },

    #[error("{what} did not converge after {iterations} iterations (residual {residual:e})")]
    ConvergenceFailure {
        what: &'static str,
        iterations: usize,
        residual: f64,
    },

    #[error("stage `{stage}` failed: {source}")]
    Stage {
        stage: String,
        #[source]
        source: Box<Error>,
    },

    #[error("malformed input {path:?}: {msg}")]
    Format { path: PathBuf, msg: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    TomlDe(#[from] toml::de::Error),

    #[error(transparent)]
    TomlSer(#[from] toml::ser::Error),
}

impl Error {
    /// True for failures of a numerical procedure, as opposed to bad input.
    pub fn is_numerical(&self) -> bool {
        match self {
            Error::Singular { .. }
            | Error::PathCap { .. }
            | Error::ConvergenceFailure { .. }
            | Error::NoExit
            | Error::EmptyBall(_)
            | Error::EmptyComplement
            | Error::Disconnected { .. } => true,
            Error::Stage { source, .. } => source.is_numerical(),
            _ => false,
        }
    }

    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidParameter(msg.into())
    }
}
