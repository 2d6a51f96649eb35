use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("validation failed: {0}")]
    Validation(String),

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("duration {duration} outside support 1..={max_duration}")]
    DurationOutOfSupport { duration: usize, max_duration: usize },

    #[error("no valid segmentation of {timesteps} timesteps: {reason}")]
    NoValidPath { timesteps: usize, reason: String },

    #[error("non-finite training objective at epoch {epoch}, batch {batch}: {value}")]
    NonFiniteObjective { epoch: usize, batch: usize, value: f64 },

    #[error("insufficient frames for task {task}, group {group}: {frames} frames, {components} components requested")]
    InsufficientFrames {
        task: String,
        group: String,
        frames: usize,
        components: usize,
    },

    #[error("missing model for {0}")]
    MissingModel(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("infeasible request: {0}")]
    Infeasible(String),

    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },

    #[error("parse error in {path}: {message}")]
    Parse { path: String, message: String },

    #[error("checksum mismatch in {path}")]
    Checksum { path: String },

    #[error("unsupported format version {found} in {path} (expected {expected})")]
    Version {
        path: String,
        found: u32,
        expected: u32,
    },
}

impl Error {
    pub(crate) fn io(path: impl AsRef<std::path::Path>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.as_ref().display().to_string(),
            source,
        }
    }

    pub(crate) fn parse(path: impl AsRef<std::path::Path>, message: impl ToString) -> Self {
        Error::Parse {
            path: path.as_ref().display().to_string(),
            message: message.to_string(),
        }
    }
}
