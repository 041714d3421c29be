use std::path::PathBuf;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("out of domain: {0}")]
    OutOfDomain(String),
    #[error("constraint violation: {0}")]
    Constraint(String),
    #[error("configuration error: {0}")]
    Config(String),
    #[error("target out of the medium's gamut: {0}")]
    Gamut(String),
    #[error("resolution error: {0}")]
    Resolution(String),
    #[error("did not converge: {0}")]
    Convergence(String),
    #[error("mesh error: {0}")]
    Mesh(String),
    #[error("missing artifact {path}: run the `{stage}` stage first")]
    MissingArtifact { path: PathBuf, stage: String },
    #[error("stale cache for stage `{0}`: its outputs were modified after it ran (rerun it, or use --force to accept them)")]
    StaleCache(String),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: {source}")]
    Image {
        path: PathBuf,
        #[source]
        source: image::ImageError,
    },
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
