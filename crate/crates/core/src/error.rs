use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    /// A configuration or profile invariant does not hold.
    #[error("invalid config: {0}")]
    Config(String),

    /// Two neighbouring particles touched (or crossed) at the given gap index.
    #[error("contact breach at gap {index} (d = {gap:e}) at t = {time}")]
    Contact { index: usize, gap: f64, time: f64 },

    /// Mass-level inversion of the initial density failed.
    #[error("initial data construction failed: {0}")]
    Init(String),

    /// Adaptive stepping could not find an admissible step.
    #[error("time step underflow at t = {time}: dt = {dt:e} below dt_min (gap {index} limiting)")]
    StepUnderflow { time: f64, dt: f64, index: usize },

    #[error("linear solve failed: {0}")]
    LinearSolve(String),

    #[error("macroscopic solver: {0}")]
    Macro(String),

    #[error("time out of range: {0}")]
    TimeOutOfRange(f64),

    #[error("certificate failure: {0}")]
    Certificate(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn config(msg: impl Into<String>) -> Self {
        Error::Config(msg.into())
    }
}
