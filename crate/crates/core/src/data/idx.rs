//! IDX binaries as published for MNIST: big-endian `u32` magic and
//! dimensions followed by raw `u8` payload.

use std::fs;
use std::path::Path;

use ndarray::{Array1, Array2};

use super::LabeledDataset;
use crate::error::{Error, Result};

pub const IMAGES_MAGIC: u32 = 2051;
pub const LABELS_MAGIC: u32 = 2049;

fn be_u32(bytes: &[u8], at: usize) -> u32 {
    u32::from_be_bytes(bytes[at..at + 4].try_into().unwrap())
}

fn header(bytes: &[u8], path: &Path, magic: u32, dims: usize) -> Result<Vec<usize>> {
    let header_len = 4 + 4 * dims;
    if bytes.len() < header_len {
        return Err(Error::format(
            path,
            format!("truncated header ({} bytes)", bytes.len()),
        ));
    }
    let found = be_u32(bytes, 0);
    if found != magic {
        return Err(Error::format(
            path,
            format!("bad magic {found}, expected {magic}"),
        ));
    }
    let shape: Vec<usize> = (0..dims)
        .map(|d| be_u32(bytes, 4 + 4 * d) as usize)
        .collect();
    let body = shape
        .iter()
        .try_fold(1u64, |acc, &d| acc.checked_mul(d as u64))
        .ok_or_else(|| Error::format(path, "dimension product overflows"))?;
    let actual = (bytes.len() - header_len) as u64;
    if actual != body {
        return Err(Error::format(
            path,
            format!("payload is {actual} bytes but header {shape:?} implies {body}"),
        ));
    }
    Ok(shape)
}

/// An IDX3 image file, kept as raw bytes.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct IdxImages {
    pub count: usize,
    pub rows: usize,
    pub cols: usize,
    pub pixels: Vec<u8>,
}

impl IdxImages {
    pub fn parse(bytes: &[u8], path: &Path) -> Result<Self> {
        let shape = header(bytes, path, IMAGES_MAGIC, 3)?;
        if shape.contains(&0) {
            return Err(Error::format(path, format!("zero dimension in {shape:?}")));
        }
        Ok(Self {
            count: shape[0],
            rows: shape[1],
            cols: shape[2],
            pixels: bytes[16..].to_vec(),
        })
    }

    pub fn read(path: &Path) -> Result<Self> {
        let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&bytes, path)
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(16 + self.pixels.len());
        for v in [
            IMAGES_MAGIC,
            self.count as u32,
            self.rows as u32,
            self.cols as u32,
        ] {
            out.extend_from_slice(&v.to_be_bytes());
        }
        out.extend_from_slice(&self.pixels);
        out
    }

    /// Rows of `rows·cols` pixels scaled into `[0, 1]`.
    pub fn to_matrix(&self) -> Array2<f64> {
        let width = self.rows * self.cols;
        Array2::from_shape_fn((self.count, width), |(i, j)| {
            f64::from(self.pixels[i * width + j]) / 255.0
        })
    }
}

/// An IDX1 label file.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct IdxLabels {
    pub labels: Vec<u8>,
}

impl IdxLabels {
    pub fn parse(bytes: &[u8], path: &Path) -> Result<Self> {
        header(bytes, path, LABELS_MAGIC, 1)?;
        Ok(Self {
            labels: bytes[8..].to_vec(),
        })
    }

    pub fn read(path: &Path) -> Result<Self> {
        let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&bytes, path)
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(8 + self.labels.len());
        out.extend_from_slice(&LABELS_MAGIC.to_be_bytes());
        out.extend_from_slice(&(self.labels.len() as u32).to_be_bytes());
        out.extend_from_slice(&self.labels);
        out
    }
}

/// Loads MNIST-style IDX files; `S = 1` exactly when the digit label equals
/// `protected_digit`.
pub fn load_mnist_idx(
    images_path: &Path,
    labels_path: &Path,
    protected_digit: u8,
) -> Result<LabeledDataset> {
    if protected_digit > 9 {
        return Err(Error::Config(format!(
            "protected digit {protected_digit} outside 0..=9"
        )));
    }
    let images = IdxImages::read(images_path)?;
    let labels = IdxLabels::read(labels_path)?;
    if images.count != labels.labels.len() {
        return Err(Error::format(
            labels_path,
            format!(
                "{} labels for {} images in {}",
                labels.labels.len(),
                images.count,
                images_path.display()
            ),
        ));
    }
    if let Some(i) = labels.labels.iter().position(|&l| l > 9) {
        return Err(Error::format(
            labels_path,
            format!("label {} at index {i} is not a digit", labels.labels[i]),
        ));
    }
    let s = Array1::from_iter(
        labels
            .labels
            .iter()
            .map(|&l| f64::from(u8::from(l == protected_digit))),
    );
    LabeledDataset::new("mnist", images.to_matrix(), s)
}
