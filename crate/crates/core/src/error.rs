use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("shape mismatch in {context}: expected {expected}, got {actual}")]
    Shape {
        context: &'static str,
        expected: usize,
        actual: usize,
    },

    #[error("architecture mismatch: {0}")]
    Architecture(String),

    #[error("non-finite gradient in layer {layer}")]
    NonFiniteGradient { layer: usize },

    #[error("training diverged: {0}")]
    Divergence(String),

    #[error("training aborted after {} evaluation points: {reason}", partial.len())]
    TrainingAborted {
        reason: String,
        partial: Box<crate::trainer::LearningCurve>,
    },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("config key `{key}`: {msg}")]
    ConfigKey { key: String, msg: String },

    #[error("unknown environment `{0}` (expected pointnav, hillclimb or cyclepattern)")]
    UnknownEnvironment(String),

    #[error("step called on a finished episode")]
    EpisodeFinished,

    #[error("scripted expert failed to solve {env} from seed {seed}")]
    ExpertFailure { env: String, seed: u64 },

    #[error("demonstration set is empty")]
    EmptyDemos,

    #[error("invalid trajectory: {0}")]
    InvalidTrajectory(String),

    #[error("cannot sample from an empty replay buffer")]
    EmptyBuffer,

    #[error("invalid transition: {0}")]
    InvalidTransition(String),

    #[error("parse error at {record}: {msg}")]
    Parse { record: String, msg: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn parse(record: impl Into<String>, msg: impl Into<String>) -> Self {
        Error::Parse {
            record: record.into(),
            msg: msg.into(),
        }
    }
}
