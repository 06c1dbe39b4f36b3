use std::fs;
use std::io::Read;
use std::path::{Path, PathBuf};

use flate2::read::GzDecoder;

use super::DataError;

pub const IMAGE_MAGIC: u32 = 0x0000_0803;
pub const LABEL_MAGIC: u32 = 0x0000_0801;

/// Images as row-major byte matrices with their class labels.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct IdxImageSet {
    pub rows: usize,
    pub cols: usize,
    pub images: Vec<Vec<u8>>,
    pub labels: Vec<u8>,
}

impl IdxImageSet {
    pub fn len(&self) -> usize {
        self.images.len()
    }

    pub fn is_empty(&self) -> bool {
        self.images.is_empty()
    }

    /// Image `i` with pixels scaled into `[0, 1]`.
    pub fn image_f64(&self, i: usize) -> Vec<f64> {
        self.images[i].iter().map(|&p| p as f64 / 255.0).collect()
    }

    pub fn truncated(&self, count: usize) -> Self {
        let count = count.min(self.len());
        Self {
            rows: self.rows,
            cols: self.cols,
            images: self.images[..count].to_vec(),
            labels: self.labels[..count].to_vec(),
        }
    }
}

fn read_be_u32(bytes: &[u8], offset: usize) -> Result<u32, DataError> {
    let chunk = bytes.get(offset..offset + 4).ok_or(DataError::Truncated {
        needed: offset + 4,
        available: bytes.len(),
    })?;
    Ok(u32::from_be_bytes(chunk.try_into().expect("4 bytes")))
}

fn check_magic(bytes: &[u8], expected: u32) -> Result<(), DataError> {
    let found = read_be_u32(bytes, 0)?;
    if found != expected {
        return Err(DataError::BadMagic {
            expected: format!("{expected:#010x}"),
            found: format!("{found:#010x}"),
        });
    }
    Ok(())
}

fn payload<'a>(bytes: &'a [u8], header: usize, dims: &[usize]) -> Result<&'a [u8], DataError> {
    let len = dims
        .iter()
        .try_fold(1usize, |acc, &d| acc.checked_mul(d))
        .ok_or_else(|| DataError::DimensionOverflow(format!("{dims:?}")))?;
    let needed = header
        .checked_add(len)
        .ok_or_else(|| DataError::DimensionOverflow(format!("{dims:?}")))?;
    if bytes.len() < needed {
        return Err(DataError::Truncated {
            needed,
            available: bytes.len(),
        });
    }
    if bytes.len() > needed {
        return Err(DataError::TrailingData {
            extra: bytes.len() - needed,
        });
    }
    Ok(&bytes[header..])
}

/// Parses an (already decompressed) IDX3 image file.
pub fn parse_idx_images(bytes: &[u8]) -> Result<(usize, usize, Vec<Vec<u8>>), DataError> {
    check_magic(bytes, IMAGE_MAGIC)?;
    let count = read_be_u32(bytes, 4)? as usize;
    let rows = read_be_u32(bytes, 8)? as usize;
    let cols = read_be_u32(bytes, 12)? as usize;
    let data = payload(bytes, 16, &[count, rows, cols])?;
    let images = if rows * cols == 0 {
        vec![Vec::new(); count]
    } else {
        data.chunks_exact(rows * cols).map(<[u8]>::to_vec).collect()
    };
    Ok((rows, cols, images))
}

/// Parses an (already decompressed) IDX1 label file.
pub fn parse_idx_labels(bytes: &[u8]) -> Result<Vec<u8>, DataError> {
    check_magic(bytes, LABEL_MAGIC)?;
    let count = read_be_u32(bytes, 4)? as usize;
    let labels = payload(bytes, 8, &[count])?.to_vec();
    if let Some((index, &value)) = labels.iter().enumerate().find(|(_, &l)| l > 9) {
        return Err(DataError::InvalidLabel { index, value });
    }
    Ok(labels)
}

/// Reads a file, transparently inflating gzip content.
fn read_maybe_gz(path: &Path) -> Result<Vec<u8>, DataError> {
    let raw = fs::read(path).map_err(|e| DataError::io(path, e))?;
    if raw.starts_with(&[0x1f, 0x8b]) {
        let mut out = Vec::new();
        GzDecoder::new(raw.as_slice())
            .read_to_end(&mut out)
            .map_err(|e| DataError::io(path, e))?;
        Ok(out)
    } else {
        Ok(raw)
    }
}

pub fn read_idx(images_path: impl AsRef<Path>, labels_path: impl AsRef<Path>) -> Result<IdxImageSet, DataError> {
    let (rows, cols, images) = parse_idx_images(&read_maybe_gz(images_path.as_ref())?)?;
    let labels = parse_idx_labels(&read_maybe_gz(labels_path.as_ref())?)?;
    if images.len() != labels.len() {
        return Err(DataError::CountMismatch {
            images: images.len(),
            labels: labels.len(),
        });
    }
    Ok(IdxImageSet {
        rows,
        cols,
        images,
        labels,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Split {
    Train,
    Test,
}

impl Split {
    fn prefix(self) -> &'static str {
        match self {
            Split::Train => "train",
            Split::Test => "t10k",
        }
    }
}

fn locate(dir: &Path, name: &str) -> PathBuf {
    let plain = dir.join(name);
    let gz = dir.join(format!("{name}.gz"));
    if !plain.exists() && gz.exists() {
        gz
    } else {
        plain
    }
}

/// Loads `{train,t10k}-{images-idx3,labels-idx1}-ubyte[.gz]` from `dir`.
pub fn load_split(dir: impl AsRef<Path>, split: Split) -> Result<IdxImageSet, DataError> {
    let dir = dir.as_ref();
    let p = split.prefix();
    read_idx(
        locate(dir, &format!("{p}-images-idx3-ubyte")),
        locate(dir, &format!("{p}-labels-idx1-ubyte")),
    )
}

pub fn encode_idx_images(rows: usize, cols: usize, images: &[Vec<u8>]) -> Vec<u8> {
    let mut out = Vec::with_capacity(16 + images.len() * rows * cols);
    out.extend_from_slice(&IMAGE_MAGIC.to_be_bytes());
    for v in [images.len(), rows, cols] {
        out.extend_from_slice(&(v as u32).to_be_bytes());
    }
    for img in images {
        debug_assert_eq!(img.len(), rows * cols);
        out.extend_from_slice(img);
    }
    out
}

pub fn encode_idx_labels(labels: &[u8]) -> Vec<u8> {
    let mut out = Vec::with_capacity(8 + labels.len());
    out.extend_from_slice(&LABEL_MAGIC.to_be_bytes());
    out.extend_from_slice(&(labels.len() as u32).to_be_bytes());
    out.extend_from_slice(labels);
    out
}
