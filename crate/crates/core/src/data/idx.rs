//! Reader for the IDX format used by MNIST (big-endian header, unsigned byte payload).

use std::path::Path;

use crate::error::{Error, Result};
use crate::linalg::RealMatrix;

pub const IMAGES_MAGIC: u32 = 0x0000_0803;
pub const LABELS_MAGIC: u32 = 0x0000_0801;

fn read_u32(bytes: &[u8], at: usize, name: &str) -> Result<u32> {
    bytes
        .get(at..at + 4)
        .map(|b| u32::from_be_bytes([b[0], b[1], b[2], b[3]]))
        .ok_or_else(|| Error::Truncated {
            path: name.to_string(),
            expected: at + 4,
            found: bytes.len(),
        })
}

fn check_magic(bytes: &[u8], expected: u32, name: &str) -> Result<()> {
    let found = read_u32(bytes, 0, name)?;
    if found != expected {
        return Err(Error::BadMagic {
            path: name.to_string(),
            expected,
            found,
        });
    }
    Ok(())
}

fn payload<'a>(bytes: &'a [u8], header: usize, len: usize, name: &str) -> Result<&'a [u8]> {
    bytes.get(header..header + len).ok_or_else(|| Error::Truncated {
        path: name.to_string(),
        expected: header + len,
        found: bytes.len(),
    })
}

/// Parses an IDX3 image file; pixels are scaled to `[0, 1]`.
pub fn parse_idx_images(bytes: &[u8], name: &str) -> Result<Vec<RealMatrix>> {
    check_magic(bytes, IMAGES_MAGIC, name)?;
    let count = read_u32(bytes, 4, name)? as usize;
    let rows = read_u32(bytes, 8, name)? as usize;
    let cols = read_u32(bytes, 12, name)? as usize;
    let size = rows * cols;
    let data = payload(bytes, 16, count * size, name)?;
    if size == 0 {
        return Err(Error::invalid(format!("{name}: zero-sized images")));
    }
    data.chunks_exact(size)
        .map(|chunk| RealMatrix::new(rows, cols, chunk.iter().map(|&b| b as f64 / 255.0).collect()))
        .collect()
}

pub fn parse_idx_labels(bytes: &[u8], name: &str) -> Result<Vec<usize>> {
    check_magic(bytes, LABELS_MAGIC, name)?;
    let count = read_u32(bytes, 4, name)? as usize;
    Ok(payload(bytes, 8, count, name)?.iter().map(|&b| b as usize).collect())
}

fn read_file(path: &Path) -> Result<Vec<u8>> {
    std::fs::read(path).map_err(|source| Error::Io {
        path: path.display().to_string(),
        source,
    })
}

pub fn load_idx_dataset(images_path: &Path, labels_path: &Path) -> Result<Vec<(RealMatrix, usize)>> {
    let images = parse_idx_images(&read_file(images_path)?, &images_path.display().to_string())?;
    let labels = parse_idx_labels(&read_file(labels_path)?, &labels_path.display().to_string())?;
    if images.len() != labels.len() {
        return Err(Error::CountMismatch {
            images: images.len(),
            labels: labels.len(),
        });
    }
    Ok(images.into_iter().zip(labels).collect())
}

/// Serialises images (values in `[0, 1]`, rounded to bytes) in IDX3 form.
pub fn encode_idx_images(images: &[RealMatrix]) -> Vec<u8> {
    let (rows, cols) = images.first().map_or((0, 0), |m| (m.rows(), m.cols()));
    let mut out = Vec::with_capacity(16 + images.len() * rows * cols);
    for v in [IMAGES_MAGIC, images.len() as u32, rows as u32, cols as u32] {
        out.extend_from_slice(&v.to_be_bytes());
    }
    for m in images {
        out.extend(m.as_slice().iter().map(|p| (p.clamp(0.0, 1.0) * 255.0).round() as u8));
    }
    out
}

pub fn encode_idx_labels(labels: &[u8]) -> Vec<u8> {
    let mut out = Vec::with_capacity(8 + labels.len());
    out.extend_from_slice(&LABELS_MAGIC.to_be_bytes());
    out.extend_from_slice(&(labels.len() as u32).to_be_bytes());
    out.extend_from_slice(labels);
    out
}
