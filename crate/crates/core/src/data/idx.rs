//! IDX container parsing (the MNIST family's on-disk format).
//!
//! Layout: `00 00 <type> <rank>`, then `rank` big-endian u32 dimensions,
//! then the payload. Only type `0x08` (unsigned byte) is supported.

use std::fs;
use std::path::Path;

use super::Dataset;
use crate::error::{Error, Result};

pub const TYPE_U8: u8 = 0x08;

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct IdxTensor {
    pub dims: Vec<usize>,
    pub data: Vec<u8>,
}

pub fn parse_idx(bytes: &[u8]) -> Result<IdxTensor> {
    let header: [u8; 4] = bytes
        .get(..4)
        .and_then(|h| h.try_into().ok())
        .ok_or(Error::IdxTruncated)?;
    if header[0] != 0 || header[1] != 0 {
        return Err(Error::IdxBadMagic([header[0], header[1]]));
    }
    if header[2] != TYPE_U8 {
        return Err(Error::IdxUnsupportedType(header[2]));
    }
    let rank = header[3] as usize;
    if rank == 0 {
        return Err(Error::Dataset("idx: rank 0 is not supported".into()));
    }
    let dims_end = 4 + 4 * rank;
    let dim_bytes = bytes.get(4..dims_end).ok_or(Error::IdxTruncated)?;
    let dims: Vec<usize> = dim_bytes
        .chunks_exact(4)
        .map(|c| u32::from_be_bytes([c[0], c[1], c[2], c[3]]) as usize)
        .collect();
    let declared = dims
        .iter()
        .try_fold(1usize, |acc, &d| acc.checked_mul(d))
        .ok_or_else(|| Error::Dataset("idx: declared size overflows".into()))?;
    let payload = &bytes[dims_end..];
    if payload.len() < declared {
        return Err(Error::IdxTruncated);
    }
    if payload.len() > declared {
        return Err(Error::IdxSizeMismatch {
            declared,
            actual: payload.len(),
        });
    }
    Ok(IdxTensor {
        dims,
        data: payload.to_vec(),
    })
}

/// Encodes an unsigned-byte IDX file.
pub fn encode_idx(dims: &[usize], data: &[u8]) -> Vec<u8> {
    let mut out = vec![0, 0, TYPE_U8, dims.len() as u8];
    for &d in dims {
        out.extend_from_slice(&(d as u32).to_be_bytes());
    }
    out.extend_from_slice(data);
    out
}

/// Maps a raw 0..=255 pixel to [0, 1]; 0 → 0.0 and 255 → 1.0 exactly.
#[inline]
pub fn normalize_pixel(p: u8) -> f32 {
    f32::from(p) / 255.0
}

/// Builds a dataset from an image file (`N×H×W` or `N×C×H×W`) and a label
/// file (`N`).
pub fn dataset_from_idx(
    name: &str,
    images: &IdxTensor,
    labels: &IdxTensor,
    num_classes: usize,
) -> Result<Dataset> {
    let (n, shape) = match images.dims.as_slice() {
        &[n, h, w] => (n, (1, h, w)),
        &[n, c, h, w] => (n, (c, h, w)),
        other => {
            return Err(Error::Dataset(format!(
                "idx images must be rank 3 or 4, got dims {other:?}"
            )))
        }
    };
    if labels.dims.as_slice() != [n] {
        return Err(Error::Dataset(format!(
            "label dims {:?} do not match {n} images",
            labels.dims
        )));
    }
    let pixels = images.data.iter().copied().map(normalize_pixel).collect();
    let labels = labels.data.iter().map(|&l| l as usize).collect();
    Dataset::new(name, shape, num_classes, pixels, labels)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Split {
    Train,
    Test,
}

/// Loads MNIST-layout files (`train-images-idx3-ubyte`, `t10k-labels-idx1-ubyte`,
/// ...) from `dir`. Nothing is ever downloaded.
pub fn load_idx_dir(dir: &Path, split: Split) -> Result<Dataset> {
    let prefix = match split {
        Split::Train => "train",
        Split::Test => "t10k",
    };
    let images = parse_idx(&fs::read(dir.join(format!("{prefix}-images-idx3-ubyte")))?)?;
    let labels = parse_idx(&fs::read(dir.join(format!("{prefix}-labels-idx1-ubyte")))?)?;
    let name = format!("{}:{prefix}", dir.display());
    dataset_from_idx(&name, &images, &labels, 10)
}
