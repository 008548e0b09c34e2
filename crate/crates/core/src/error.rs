use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("empty index")]
    EmptyIndex,

    #[error("invalid parameter: {0}")]
    Param(String),

    #[error("insufficient points: need at least {needed}, got {got}")]
    InsufficientPoints { needed: usize, got: usize },

    #[error("no overlap")]
    NoOverlap,

    #[error("empty mesh")]
    EmptyMesh,

    #[error("{stage} failed for sample {index}: {source}")]
    Sample {
        index: usize,
        stage: &'static str,
        #[source]
        source: Box<Error>,
    },

    #[error("seed blocked")]
    SeedBlocked,

    #[error("point ({0}, {1}) is outside the map")]
    OutOfBounds(f64, f64),

    #[error("degenerate sample")]
    DegenerateSample,

    #[error("configuration error: {0}")]
    Config(String),

    #[error("parse error: {0}")]
    Parse(String),

    #[error("missing artifact: {0}")]
    MissingArtifact(String),

    #[error("{stage}: {source}")]
    Stage {
        stage: &'static str,
        #[source]
        source: Box<Error>,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn param(msg: impl Into<String>) -> Self {
        Error::Param(msg.into())
    }

    pub(crate) fn parse(msg: impl Into<String>) -> Self {
        Error::Parse(msg.into())
    }

    /// Wraps an error with the name of the pipeline stage that produced it.
    pub fn in_stage(self, stage: &'static str) -> Self {
        match self {
            e @ Error::Stage { .. } => e,
            e => Error::Stage {
                stage,
                source: Box::new(e),
            },
        }
    }
}
