use thiserror::Error;

/// Errors raised across the navigation lab.
#[derive(Debug, Error)]
pub enum Error {
    #[error("non-finite vessel state after integration step (t = {time:.3} s)")]
    NonFiniteState { time: f64 },

    #[error("terminal speed did not converge within {0} simulated seconds")]
    NoConvergence(f64),

    #[error("scenario sampling failed after {attempts} attempts: {reason}")]
    SamplingFailed { attempts: usize, reason: String },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("no compliant direction is defined for an encounter classified as None")]
    NoEncounter,

    #[error("zero-length velocity vector in angle computation")]
    ZeroVector,

    #[error("quantile fraction {0} outside [0, 1]")]
    QuantileRange(f64),

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("training diverged: {0}")]
    Divergence(String),

    #[error("potential field singularity: robot coincides with an obstacle")]
    Singularity,

    #[error("checkpoint error: {0}")]
    Checkpoint(String),

    #[error("agent kind `{0}` is out of scope for this build")]
    OutOfScope(String),

    #[error("empty input: {0}")]
    Empty(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
