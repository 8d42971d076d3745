use std::path::PathBuf;

/// Errors produced anywhere in the pipeline.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("unsupported or malformed image: {0}")]
    Format(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("segmentation collapsed to a single phase at iteration {iteration}")]
    DegenerateSegmentation { iteration: usize },

    #[error("ellipse fit is degenerate: {0}")]
    FitDegenerate(String),

    #[error("fitted conic is not an ellipse: {0}")]
    NotAnEllipse(String),

    #[error("cluster {label} could not be resolved into ellipses")]
    UnresolvedCluster { label: usize },

    #[error("configuration error: {0}")]
    Config(String),

    #[error("ground truth error: {0}")]
    Truth(String),

    #[error("image {id}: {source}")]
    Image {
        id: String,
        #[source]
        source: Box<Error>,
    },
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }
}
