use std::path::PathBuf;

use thiserror::Error;

/// Errors raised by the color, engine, spatial, mask and pipeline modules.
#[derive(Debug, Error)]
pub enum Error {
    /// Combined mean intensity is at or below the black floor; the
    /// Gray World illuminant is undefined.
    #[error("degenerate image: combined mean intensity {mean} is at or below {floor}")]
    DegenerateImage { mean: f64, floor: f64 },

    #[error("invalid image: {0}")]
    InvalidImage(String),

    #[error("invalid illuminant profile: {0}")]
    InvalidProfile(String),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("dimension mismatch: {left_w}x{left_h} vs {right_w}x{right_h}")]
    DimensionMismatch {
        left_w: usize,
        left_h: usize,
        right_w: usize,
        right_h: usize,
    },

    /// No pool entry other than the source image exists.
    #[error("illuminant pool has no eligible counterpart for `{0}`")]
    EmptyPool(String),

    /// Every eligible counterpart has the same illuminant as the source, so
    /// the distance ratio is undefined.
    #[error("illuminant pool is degenerate for `{0}`: furthest counterpart is at distance 0")]
    DegeneratePool(String),

    #[error("duplicate image id `{0}`")]
    DuplicateId(String),

    #[error("image id `{0}` is not in the illuminant pool")]
    SourceNotInPool(String),

    #[error("pool/manifest mismatch: {0}")]
    PoolMismatch(String),

    #[error("missing file {0}")]
    MissingFile(PathBuf),

    #[error("io error at {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("image codec error at {path}: {source}")]
    Codec {
        path: PathBuf,
        #[source]
        source: image::ImageError,
    },

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// True for failures caused by the filesystem or codecs rather than by
    /// the data or configuration.
    pub fn is_io(&self) -> bool {
        matches!(
            self,
            Error::Io { .. } | Error::Codec { .. } | Error::MissingFile(_) | Error::Csv(_)
        )
    }
}

pub type Result<T> = std::result::Result<T, Error>;
