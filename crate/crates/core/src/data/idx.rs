//! IDX files as distributed with MNIST.
//!
//! Header words are big-endian `u32`. Images: magic `0x00000803`, count,
//! rows, cols, then `count·rows·cols` unsigned bytes. Labels: magic
//! `0x00000801`, count, then `count` bytes.

use std::fs;
use std::io::Write;
use std::path::Path;

use super::LabeledSet;
use crate::error::{PuError, Result};
use crate::matrix::Matrix;

pub const IMAGES_MAGIC: u32 = 0x0000_0803;
pub const LABELS_MAGIC: u32 = 0x0000_0801;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct IdxImages {
    pub count: usize,
    pub rows: usize,
    pub cols: usize,
    pub pixels: Vec<u8>,
}

fn word(bytes: &[u8], at: usize, what: &str) -> Result<u32> {
    bytes
        .get(at..at + 4)
        .map(|w| u32::from_be_bytes([w[0], w[1], w[2], w[3]]))
        .ok_or_else(|| PuError::Idx(format!("truncated header reading {what}")))
}

pub fn parse_images(bytes: &[u8]) -> Result<IdxImages> {
    let magic = word(bytes, 0, "magic")?;
    if magic != IMAGES_MAGIC {
        return Err(PuError::Idx(format!("bad image magic {magic:#010x}")));
    }
    let count = word(bytes, 4, "image count")? as usize;
    let rows = word(bytes, 8, "row count")? as usize;
    let cols = word(bytes, 12, "column count")? as usize;
    let need = count
        .checked_mul(rows)
        .and_then(|v| v.checked_mul(cols))
        .ok_or_else(|| PuError::Idx("image dimensions overflow".into()))?;
    let body = &bytes[16..];
    if body.len() < need {
        return Err(PuError::Idx(format!(
            "truncated image data: {} of {need} bytes",
            body.len()
        )));
    }
    Ok(IdxImages {
        count,
        rows,
        cols,
        pixels: body[..need].to_vec(),
    })
}

pub fn parse_labels(bytes: &[u8]) -> Result<Vec<u8>> {
    let magic = word(bytes, 0, "magic")?;
    if magic != LABELS_MAGIC {
        return Err(PuError::Idx(format!("bad label magic {magic:#010x}")));
    }
    let count = word(bytes, 4, "label count")? as usize;
    let body = &bytes[8..];
    if body.len() < count {
        return Err(PuError::Idx(format!(
            "truncated label data: {} of {count} bytes",
            body.len()
        )));
    }
    Ok(body[..count].to_vec())
}

pub fn encode_images(images: &IdxImages) -> Vec<u8> {
    let mut out = Vec::with_capacity(16 + images.pixels.len());
    for w in [
        IMAGES_MAGIC,
        images.count as u32,
        images.rows as u32,
        images.cols as u32,
    ] {
        out.extend_from_slice(&w.to_be_bytes());
    }
    out.extend_from_slice(&images.pixels);
    out
}

pub fn encode_labels(labels: &[u8]) -> Vec<u8> {
    let mut out = Vec::with_capacity(8 + labels.len());
    out.extend_from_slice(&LABELS_MAGIC.to_be_bytes());
    out.extend_from_slice(&(labels.len() as u32).to_be_bytes());
    out.extend_from_slice(labels);
    out
}

pub fn write_images(path: impl AsRef<Path>, images: &IdxImages) -> Result<()> {
    fs::File::create(path)?.write_all(&encode_images(images))?;
    Ok(())
}

pub fn write_labels(path: impl AsRef<Path>, labels: &[u8]) -> Result<()> {
    fs::File::create(path)?.write_all(&encode_labels(labels))?;
    Ok(())
}

/// Pixels scaled to [0, 1]; even digits are positive, odd digits negative.
pub fn to_labeled(images: &IdxImages, digits: &[u8]) -> Result<LabeledSet> {
    if images.count != digits.len() {
        return Err(PuError::Idx(format!(
            "{} images but {} labels",
            images.count,
            digits.len()
        )));
    }
    let d = images.rows * images.cols;
    let data = images.pixels.iter().map(|&p| f64::from(p) / 255.0).collect();
    Ok(LabeledSet {
        points: Matrix::new(images.count, d, data)?,
        labels: digits.iter().map(|&l| if l % 2 == 0 { 1 } else { -1 }).collect(),
    })
}

/// Reads an image/label file pair into an even-vs-odd labeled set.
pub fn load_mnist_idx(images_path: impl AsRef<Path>, labels_path: impl AsRef<Path>) -> Result<LabeledSet> {
    let images = parse_images(&fs::read(images_path)?)?;
    let digits = parse_labels(&fs::read(labels_path)?)?;
    to_labeled(&images, &digits)
}
