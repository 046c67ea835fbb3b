use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    /// Every violation found while validating a configuration.
    #[error("invalid configuration: {}", .0.join("; "))]
    InvalidConfig(Vec<String>),

    #[error("wave function is degenerate (zero or non-finite total weight)")]
    DegenerateState,

    #[error("wave function not normalized: norm^2 = {0}")]
    NotNormalized(f64),

    #[error("non-finite value in {0}")]
    NonFinite(&'static str),

    #[error("boundary mass {mass:.3e} exceeds limit at t = {time}")]
    BoundaryMass { mass: f64, time: f64 },

    #[error("void collapse: normalization constant {c:.3e} at t = {time}")]
    VoidCollapse { c: f64, time: f64 },

    #[error("packet too wide for domain: boundary mass {0:.3e}")]
    PacketTooWide(f64),

    #[error("{0}")]
    Usage(String),

    #[error("abort rate {rate:.4} exceeds 1% ({aborted} of {total} trajectories)")]
    AbortRate {
        aborted: usize,
        total: usize,
        rate: f64,
    },

    #[error("too few samples: {got} (need {need})")]
    TooFewSamples { got: usize, need: usize },

    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
