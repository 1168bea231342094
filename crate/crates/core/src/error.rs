use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("no land-valid point found in sector {cell_id} after {attempts} attempts")]
    ClippingExhausted { cell_id: String, attempts: u32 },

    #[error("events for user {user_id} are not sorted by timestamp (at index {index})")]
    UnsortedInput { user_id: String, index: usize },

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("event log is empty")]
    EmptyLog,

    #[error("log contains directly-follows pair ({0}, {1}) that the model does not")]
    MismatchedLog(String, String),

    #[error("variant selection matched no traces")]
    EmptySelection,

    #[error("cannot build a workflow net from an empty model")]
    EmptyModel,

    #[error("degenerate regression input: {0}")]
    DegenerateInput(String),

    #[error("survey classes do not partition destinations: {0}")]
    ClassMismatch(String),

    #[error("invalid config: {0}")]
    InvalidConfig(String),

    #[error("detected data does not belong to this scenario: {0}")]
    ScenarioMismatch(String),

    #[error("stage `{stage}` needs {artifact}; run `{needs}` first")]
    MissingDependency {
        stage: &'static str,
        artifact: PathBuf,
        needs: &'static str,
    },

    #[error("{0} already exists; pass --force to overwrite")]
    ArtifactExists(PathBuf),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}: {message}")]
    Parse { path: PathBuf, message: String },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn parse(path: impl Into<PathBuf>, message: impl ToString) -> Self {
        Error::Parse {
            path: path.into(),
            message: message.to_string(),
        }
    }

    /// True for failures caused by the filesystem rather than by the data.
    pub fn is_io(&self) -> bool {
        matches!(self, Error::Io { .. })
    }
}
