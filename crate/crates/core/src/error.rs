use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Broad failure classes, used by the CLI to pick an exit code.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorKind {
    Usage,
    Data,
    Numeric,
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("mesh has no texture coordinates on face {face} (atlas required)")]
    AtlasRequired { face: usize },

    #[error("face {face} references {what} index {index}, but only {count} exist")]
    IndexOutOfRange {
        face: usize,
        what: &'static str,
        index: i64,
        count: usize,
    },

    #[error("mesh has no faces")]
    EmptyMesh,

    #[error("mesh normals have not been computed")]
    MissingNormals,

    #[error("all vertices coincide; cannot normalize a zero extent")]
    DegenerateExtent,

    #[error("face {0} is degenerate")]
    DegenerateFace(usize),

    #[error("face id {face} out of range for a mesh with {count} faces")]
    FaceOutOfRange { face: usize, count: usize },

    #[error("invalid {what} file: {reason}")]
    BadFormat { what: &'static str, reason: String },

    #[error("non-finite value in tensor `{tensor}`")]
    NonFinite { tensor: String },

    #[error("attention block called with no records")]
    EmptyRecords,

    #[error("texel has an empty pixel neighborhood")]
    EmptyNeighborhood,

    #[error("texture has no filled texels to inpaint from")]
    EmptyTexture,

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("schedule references unknown view {view} (have {count})")]
    UnknownView { view: usize, count: usize },

    #[error("non-finite loss at step {step} (texel {texel:?}); last good checkpoint: {checkpoint:?}")]
    Divergence {
        step: usize,
        texel: Option<usize>,
        checkpoint: Option<PathBuf>,
    },

    #[error("image error: {0}")]
    Image(#[from] image::ImageError),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub fn bad_format(what: &'static str, reason: impl Into<String>) -> Self {
        Error::BadFormat {
            what,
            reason: reason.into(),
        }
    }

    pub fn kind(&self) -> ErrorKind {
        match self {
            Error::InvalidConfig(_) | Error::UnknownView { .. } => ErrorKind::Usage,
            Error::NonFinite { .. } | Error::Divergence { .. } => ErrorKind::Numeric,
            _ => ErrorKind::Data,
        }
    }
}
