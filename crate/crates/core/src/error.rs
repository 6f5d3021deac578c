//! Error type shared by every module in the crate.

use std::path::PathBuf;

use crate::classify::LevelState;

/// Everything that can go wrong across the pipeline.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    /// Two buffers that must agree in size do not.
    #[error("dimension mismatch: {expected_w}x{expected_h} vs {got_w}x{got_h}")]
    DimensionMismatch {
        expected_w: u32,
        expected_h: u32,
        got_w: u32,
        got_h: u32,
    },

    /// An operation received an image with the wrong number of channels.
    #[error("expected a {expected}-channel image, got {got} channel(s)")]
    ChannelMismatch { expected: u8, got: u8 },

    /// A numeric or structural argument is outside its documented range.
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    /// A feature vector does not match the length a model expects.
    #[error("feature vector has length {got}, expected {expected}")]
    FeatureLength { expected: usize, got: usize },

    /// A training set does not cover every level state.
    #[error("training set is missing classes: {missing:?}")]
    MissingClasses { missing: Vec<LevelState> },

    /// An input collection that must contain at least one element is empty.
    #[error("{what} must not be empty")]
    Empty { what: &'static str },

    /// Reading or writing a file failed; the message includes the decode or
    /// encode detail.
    #[error("{path}: {message}")]
    File { path: PathBuf, message: String },

    /// An input image uses a sample format the pipeline does not accept.
    #[error("{path}: unsupported image format: {detail}")]
    UnsupportedImage { path: PathBuf, detail: String },

    /// A serialized model failed validation while loading.
    #[error("model data corrupt: {0}")]
    ModelFormat(String),
}

impl Error {
    /// Builds a [`Error::File`] from any displayable cause.
    pub fn file(path: impl Into<PathBuf>, cause: impl std::fmt::Display) -> Self {
        Error::File {
            path: path.into(),
            message: cause.to_string(),
        }
    }

    /// Builds a [`Error::DimensionMismatch`] from two `(width, height)` pairs.
    pub fn dims(expected: (u32, u32), got: (u32, u32)) -> Self {
        Error::DimensionMismatch {
            expected_w: expected.0,
            expected_h: expected.1,
            got_w: got.0,
            got_h: got.1,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
