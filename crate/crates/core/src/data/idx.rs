use std::fs;
use std::io::Read;
use std::path::{Path, PathBuf};

use flate2::read::GzDecoder;

use super::ImageDataset;
use crate::error::{Error, Result};
use crate::preprocess::pixel_normalize;

pub const IDX_IMAGES_MAGIC: u32 = 2051;
pub const IDX_LABELS_MAGIC: u32 = 2049;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct IdxImages {
    pub rows: usize,
    pub cols: usize,
    pub pixels: Vec<u8>,
}

impl IdxImages {
    pub fn count(&self) -> usize {
        self.pixels.len() / (self.rows * self.cols)
    }
}

fn be_u32(bytes: &[u8], at: usize) -> Result<u32> {
    bytes
        .get(at..at + 4)
        .map(|b| u32::from_be_bytes([b[0], b[1], b[2], b[3]]))
        .ok_or_else(|| Error::format("idx file", "header truncated"))
}

/// Raw file bytes, transparently inflating gzip.
fn read_maybe_gz(path: &Path) -> Result<Vec<u8>> {
    let raw = fs::read(path)?;
    if raw.starts_with(&[0x1f, 0x8b]) {
        let mut out = Vec::new();
        GzDecoder::new(raw.as_slice()).read_to_end(&mut out)?;
        Ok(out)
    } else {
        Ok(raw)
    }
}

pub fn read_idx_images(bytes: &[u8]) -> Result<IdxImages> {
    let magic = be_u32(bytes, 0)?;
    if magic != IDX_IMAGES_MAGIC {
        return Err(Error::format("idx file", format!("image magic {magic}, expected {IDX_IMAGES_MAGIC}")));
    }
    let count = be_u32(bytes, 4)? as usize;
    let rows = be_u32(bytes, 8)? as usize;
    let cols = be_u32(bytes, 12)? as usize;
    let need = count * rows * cols;
    let body = &bytes[16..];
    if body.len() != need {
        return Err(Error::format("idx file", format!("{count}×{rows}×{cols} images need {need} bytes, found {}", body.len())));
    }
    Ok(IdxImages { rows, cols, pixels: body.to_vec() })
}

pub fn read_idx_labels(bytes: &[u8]) -> Result<Vec<u8>> {
    let magic = be_u32(bytes, 0)?;
    if magic != IDX_LABELS_MAGIC {
        return Err(Error::format("idx file", format!("label magic {magic}, expected {IDX_LABELS_MAGIC}")));
    }
    let count = be_u32(bytes, 4)? as usize;
    let body = &bytes[8..];
    if body.len() != count {
        return Err(Error::format("idx file", format!("{count} labels declared, {} present", body.len())));
    }
    Ok(body.to_vec())
}

fn locate(dir: &Path, stem: &str) -> Result<PathBuf> {
    for candidate in [stem.to_string(), format!("{stem}.gz"), stem.replacen("-idx", ".idx", 1)] {
        let p = dir.join(&candidate);
        if p.is_file() {
            return Ok(p);
        }
    }
    Err(Error::Io(std::io::Error::new(
        std::io::ErrorKind::NotFound,
        format!("{stem}[.gz] not found in {}", dir.display()),
    )))
}

/// Loads `train` or `t10k` from a directory holding the standard file names
/// (optionally gzipped). Pixels go through [`pixel_normalize`].
pub fn load_mnist(dir: &Path, split: &str) -> Result<ImageDataset> {
    let images = read_idx_images(&read_maybe_gz(&locate(dir, &format!("{split}-images-idx3-ubyte"))?)?)?;
    let labels = read_idx_labels(&read_maybe_gz(&locate(dir, &format!("{split}-labels-idx1-ubyte"))?)?)?;
    if labels.len() != images.count() {
        return Err(Error::format("idx file", format!("{} images but {} labels", images.count(), labels.len())));
    }
    let pixels = images.pixels.iter().map(|&p| pixel_normalize(p as f32)).collect();
    ImageDataset::new([1, images.rows, images.cols], pixels, labels.into_iter().map(usize::from).collect())
}
