use thiserror::Error;

/// Errors produced anywhere in the pipeline.
#[derive(Debug, Error)]
pub enum Error {
    #[error("degenerate input: {0}")]
    DegenerateInput(String),

    #[error("projection singularity at point ({x}, {y}, {z}): |w| = {w:e}")]
    ProjectionSingularity { x: f64, y: f64, z: f64, w: f64 },

    #[error("zero tangent at sample {index}")]
    ZeroTangent { index: usize },

    #[error("index out of domain: {0}")]
    OutOfDomain(String),

    #[error("no contours extracted: {0}")]
    EmptyContours(String),

    #[error("loss undefined: {0}")]
    UndefinedLoss(String),

    #[error("non-finite loss at iteration {iteration}: {terms}")]
    NonFiniteLoss { iteration: usize, terms: String },

    #[error("domain error: {0}")]
    Domain(String),

    #[error("checkpoint error: {0}")]
    Checkpoint(String),

    #[error("parse error: {0}")]
    Parse(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("I/O error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn io(path: impl AsRef<std::path::Path>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.as_ref().display().to_string(),
            source,
        }
    }

    /// True for failures caused by numerics rather than by malformed inputs.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::ProjectionSingularity { .. }
                | Error::NonFiniteLoss { .. }
                | Error::UndefinedLoss(_)
                | Error::ZeroTangent { .. }
        )
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
