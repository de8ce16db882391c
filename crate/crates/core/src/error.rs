use std::path::PathBuf;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    /// A ground-truth description violates one of its invariants.
    #[error("invalid MDP spec: {0}")]
    InvalidSpec(String),

    /// An argument is outside the domain of the operation.
    #[error("invalid argument: {0}")]
    Argument(String),

    /// Two tables that must agree in shape do not.
    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("instance too large for exhaustive enumeration: {policies} policies exceeds {limit}")]
    TooLarge { policies: f64, limit: f64 },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("I/O error at {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Toml(#[from] toml::de::Error),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
