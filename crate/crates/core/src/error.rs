use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("not found: {0}")]
    NotFound(PathBuf),

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("no frames matched in {0}")]
    EmptySequence(PathBuf),

    #[error("index {index} out of range ({detail})")]
    OutOfRange { index: usize, detail: String },

    #[error("shape error: {0}")]
    Shape(String),

    #[error("domain error: {0}")]
    Domain(String),

    /// A non-finite value showed up; `component` names the stage or loss term.
    #[error("numerical error in {component}: {detail}")]
    Numerical { component: String, detail: String },

    #[error("dataset is empty")]
    EmptyDataset,

    #[error("clip {0} has no foreground masks")]
    MissingMasks(String),

    #[error("incompatible checkpoint: {0}")]
    IncompatibleCheckpoint(String),

    #[error("parse error: {0}")]
    Parse(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Image(#[from] image::ImageError),

    #[error(transparent)]
    Tensor(#[from] candle_core::Error),
}

impl Error {
    pub(crate) fn shape(msg: impl Into<String>) -> Self {
        Error::Shape(msg.into())
    }

    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }

    pub(crate) fn numerical(component: impl Into<String>, detail: impl Into<String>) -> Self {
        Error::Numerical {
            component: component.into(),
            detail: detail.into(),
        }
    }
}
