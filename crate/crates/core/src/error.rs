use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("{context}: shape mismatch, expected {expected:?} but found {found:?}")]
    ShapeMismatch {
        context: String,
        expected: Vec<usize>,
        found: Vec<usize>,
    },

    #[error("{0}: non-finite value")]
    NonFinite(String),

    #[error("stale or mismatched cache: {0}")]
    StaleCache(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("simulation fault at t = {time:.3} s: {reason}")]
    SimulationFault { time: f64, reason: String },

    #[error("episode already finished; call reset before stepping")]
    EpisodeFinished,

    #[error("replay buffer holds {stored} transitions, {requested} requested")]
    InsufficientData { stored: usize, requested: usize },

    #[error("checkpoint: {0}")]
    Checkpoint(String),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn shape(context: impl Into<String>, expected: &[usize], found: &[usize]) -> Self {
        Error::ShapeMismatch {
            context: context.into(),
            expected: expected.to_vec(),
            found: found.to_vec(),
        }
    }
}
