//! IDX file parsing and writing (the MNIST container format).
//!
//! Big-endian headers: images carry magic `0x00000803` and three dimension
//! words (count, rows, cols), labels carry `0x00000801` and one. Pixel
//! bytes are scaled by 1/255 on load.

use std::fs;
use std::path::Path;

use super::{Dataset, Split};

pub const IMAGES_MAGIC: u32 = 0x0000_0803;
pub const LABELS_MAGIC: u32 = 0x0000_0801;

#[derive(Debug, thiserror::Error)]
pub enum IdxError {
    #[error("{path}: bad magic {found:#010x}, expected {expected:#010x}")]
    BadMagic {
        path: String,
        found: u32,
        expected: u32,
    },
    #[error("{path}: truncated, need {needed} bytes but file has {found}")]
    Truncated {
        path: String,
        needed: usize,
        found: usize,
    },
    #[error("image count {images} does not match label count {labels}")]
    CountMismatch { images: usize, labels: usize },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

fn be_u32(bytes: &[u8], offset: usize, path: &str) -> Result<u32, IdxError> {
    let end = offset + 4;
    if bytes.len() < end {
        return Err(IdxError::Truncated {
            path: path.into(),
            needed: end,
            found: bytes.len(),
        });
    }
    Ok(u32::from_be_bytes(bytes[offset..end].try_into().unwrap()))
}

/// Load an image/label IDX file pair into a dataset.
pub fn load_idx(images_path: &Path, labels_path: &Path) -> Result<Dataset, IdxError> {
    let ipath = images_path.display().to_string();
    let lpath = labels_path.display().to_string();
    let ibytes = fs::read(images_path)?;
    let lbytes = fs::read(labels_path)?;

    let imagic = be_u32(&ibytes, 0, &ipath)?;
    if imagic != IMAGES_MAGIC {
        return Err(IdxError::BadMagic {
            path: ipath,
            found: imagic,
            expected: IMAGES_MAGIC,
        });
    }
    let lmagic = be_u32(&lbytes, 0, &lpath)?;
    if lmagic != LABELS_MAGIC {
        return Err(IdxError::BadMagic {
            path: lpath,
            found: lmagic,
            expected: LABELS_MAGIC,
        });
    }

    let n_images = be_u32(&ibytes, 4, &ipath)? as usize;
    let rows = be_u32(&ibytes, 8, &ipath)? as usize;
    let cols = be_u32(&ibytes, 12, &ipath)? as usize;
    let n_labels = be_u32(&lbytes, 4, &lpath)? as usize;
    if n_images != n_labels {
        return Err(IdxError::CountMismatch {
            images: n_images,
            labels: n_labels,
        });
    }

    let input_dim = rows * cols;
    let needed = 16 + n_images * input_dim;
    if ibytes.len() < needed {
        return Err(IdxError::Truncated {
            path: ipath,
            needed,
            found: ibytes.len(),
        });
    }
    if lbytes.len() < 8 + n_labels {
        return Err(IdxError::Truncated {
            path: lpath,
            needed: 8 + n_labels,
            found: lbytes.len(),
        });
    }

    let inputs: Vec<f32> = ibytes[16..needed]
        .iter()
        .map(|b| *b as f32 / 255.0)
        .collect();
    let labels: Vec<u8> = lbytes[8..8 + n_labels].to_vec();
    let num_classes = labels.iter().copied().max().map_or(0, |m| m as usize + 1);

    Ok(Dataset {
        name: images_path
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_else(|| "idx".into()),
        split: Split::Test,
        input_dim,
        num_classes,
        inputs,
        labels,
    })
}

/// Write images as an IDX file (`pixels` is `n * rows * cols` bytes).
pub fn write_idx_images(path: &Path, rows: u32, cols: u32, pixels: &[u8]) -> std::io::Result<()> {
    let n = pixels.len() as u32 / (rows * cols);
    let mut bytes = Vec::with_capacity(16 + pixels.len());
    bytes.extend_from_slice(&IMAGES_MAGIC.to_be_bytes());
    bytes.extend_from_slice(&n.to_be_bytes());
    bytes.extend_from_slice(&rows.to_be_bytes());
    bytes.extend_from_slice(&cols.to_be_bytes());
    bytes.extend_from_slice(pixels);
    fs::write(path, bytes)
}

pub fn write_idx_labels(path: &Path, labels: &[u8]) -> std::io::Result<()> {
    let mut bytes = Vec::with_capacity(8 + labels.len());
    bytes.extend_from_slice(&LABELS_MAGIC.to_be_bytes());
    bytes.extend_from_slice(&(labels.len() as u32).to_be_bytes());
    bytes.extend_from_slice(labels);
    fs::write(path, bytes)
}
