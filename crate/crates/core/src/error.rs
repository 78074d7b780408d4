use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("non-finite state produced at step {step}")]
    NumericOverflow { step: usize },

    #[error("configuration error: {0}")]
    Config(String),

    #[error("no admissible Bernstein scale M up to {ceiling:e}; the variable looks heavy-tailed, use the weak-moment bounds instead")]
    HeavyTail { ceiling: f64 },

    #[error("need at least {required} samples, got {got}")]
    InsufficientSamples { required: usize, got: usize },

    #[error("transport oracle accepts at most {max} atoms per measure, got {got}")]
    SizeCap { max: usize, got: usize },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn domain(msg: impl Into<String>) -> Error {
    Error::Domain(msg.into())
}
