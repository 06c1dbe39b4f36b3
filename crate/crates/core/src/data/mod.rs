//! FashionMNIST IDX ingestion and the weight container format.

mod idx;
mod synth;
mod weights;

use std::path::PathBuf;

pub use idx::{
    encode_idx_images, encode_idx_labels, load_split, parse_idx_images, parse_idx_labels, read_idx, IdxImageSet, Split,
    IMAGE_MAGIC, LABEL_MAGIC,
};
pub use synth::synthetic_dataset;
pub use weights::{fixture_weights, read_weights, write_weights, WeightContainer, WeightTensor, WEIGHT_MAGIC};

#[derive(Debug, thiserror::Error)]
pub enum DataError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("bad magic: expected {expected}, found {found}")]
    BadMagic { expected: String, found: String },
    #[error("truncated data: needed {needed} bytes, {available} available")]
    Truncated { needed: usize, available: usize },
    #[error("{extra} unexpected trailing bytes")]
    TrailingData { extra: usize },
    #[error("image count {images} does not match label count {labels}")]
    CountMismatch { images: usize, labels: usize },
    #[error("label {value} at index {index} is outside 0..=9")]
    InvalidLabel { index: usize, value: u8 },
    #[error("unsupported format version {0}")]
    Version(u8),
    #[error("checksum mismatch: stored {stored:#010x}, computed {computed:#010x}")]
    Checksum { stored: u32, computed: u32 },
    #[error("dimension overflow: {0}")]
    DimensionOverflow(String),
    #[error("tensor name is not valid UTF-8")]
    Utf8,
    #[error("duplicate tensor name {0:?}")]
    DuplicateTensor(String),
    #[error(transparent)]
    Network(#[from] crate::nn::NnError),
}

impl DataError {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Self::Io {
            path: path.into(),
            source,
        }
    }
}
