use std::path::PathBuf;

/// Errors produced by the toolkit.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("length mismatch: expected {expected}, got {actual}")]
    LengthMismatch { expected: usize, actual: usize },

    #[error("L0 corruption with ratio {epsilon} marks no component of a {dim}-dimensional vector; minimum ratio is {min_epsilon}")]
    EmptyL0Selection { epsilon: f64, dim: usize, min_epsilon: f64 },

    #[error("unknown corruption set `{0}`")]
    UnknownSet(String),

    #[error("unknown profile `{0}`")]
    UnknownProfile(String),

    #[error("duplicate corruption set name `{0}`")]
    DuplicateSet(String),

    #[error("line {line}: {message}")]
    Syntax { line: usize, message: String },

    #[error("invalid value for field `{field}`: {message}")]
    Invariant { field: String, message: String },

    #[error("corruption set `{0}` is empty")]
    EmptySet(String),

    #[error("missing error cell ({corruption}, severity {severity})")]
    MissingCell { corruption: String, severity: u32 },

    #[error("unexpected corruption label `{0}`")]
    ExtraCorruption(String),

    #[error("expected {expected} noise corruptions, found {actual}")]
    NoiseFlagCount { expected: usize, actual: usize },

    #[error("clean error rate is zero; relative increase is undefined")]
    ZeroCleanError,

    #[error("{0}")]
    Format(String),

    #[error("manifest does not match dataset: {0}")]
    ManifestMismatch(String),

    #[error("unsupported manifest version `{0}`")]
    ManifestVersion(String),

    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn param(name: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            name,
            reason: reason.into(),
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// True for failures caused by the filesystem rather than by the inputs.
    pub fn is_io(&self) -> bool {
        matches!(self, Error::Io { .. })
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
