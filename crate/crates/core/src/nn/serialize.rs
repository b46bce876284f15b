//! Binary network container.
//!
//! Layout (all integers little-endian):
//!
//! ```text
//! "CNSR"            4 bytes
//! version           u32
//! layer_count       u32
//! per layer:
//!   input_dim       u32
//!   output_dim      u32
//!   activation      u8   (0 identity, 1 relu, 2 sigmoid, 3 tanh)
//!   weights         f64 × output_dim·input_dim, row-major
//!   bias            f64 × output_dim
//! ```

use std::fs;
use std::path::Path;

use ndarray::{Array1, Array2};

use super::{Activation, DenseLayer, DenseNetwork, LayerSpec};
use crate::error::{Error, Result};

pub const MAGIC: &[u8; 4] = b"CNSR";
pub const FORMAT_VERSION: u32 = 1;

struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.buf.len());
        let end = end.ok_or_else(|| Error::Decode(format!("truncated at byte {}", self.pos)))?;
        let s = &self.buf[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn f64s(&mut self, n: usize) -> Result<Vec<f64>> {
        let bytes = self.take(
            n.checked_mul(8)
                .ok_or_else(|| Error::Decode("size overflow".into()))?,
        )?;
        Ok(bytes
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
            .collect())
    }
}

impl DenseNetwork {
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(12 + self.param_count() * 8 + self.layers().len() * 9);
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
        out.extend_from_slice(&(self.layers().len() as u32).to_le_bytes());
        for layer in self.layers() {
            let spec = layer.spec();
            out.extend_from_slice(&(spec.input_dim as u32).to_le_bytes());
            out.extend_from_slice(&(spec.output_dim as u32).to_le_bytes());
            out.push(spec.activation.tag());
            for w in layer.weights().iter() {
                out.extend_from_slice(&w.to_le_bytes());
            }
            for b in layer.bias().iter() {
                out.extend_from_slice(&b.to_le_bytes());
            }
        }
        out
    }

    /// Decodes a container. The result is not frozen; freezing is a property
    /// of the owning stack, not of the stored parameters.
    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let mut r = Reader { buf: bytes, pos: 0 };
        if r.take(4)? != MAGIC {
            return Err(Error::Decode("bad magic".into()));
        }
        let version = r.u32()?;
        if version != FORMAT_VERSION {
            return Err(Error::Decode(format!("unsupported version {version}")));
        }
        let count = r.u32()? as usize;
        if count == 0 {
            return Err(Error::Decode("zero layers".into()));
        }
        let mut layers = Vec::with_capacity(count.min(1024));
        for _ in 0..count {
            let input_dim = r.u32()? as usize;
            let output_dim = r.u32()? as usize;
            let tag = r.take(1)?[0];
            let activation = Activation::from_tag(tag)
                .ok_or_else(|| Error::Decode(format!("unknown activation tag {tag}")))?;
            let n = input_dim
                .checked_mul(output_dim)
                .ok_or_else(|| Error::Decode("size overflow".into()))?;
            let weights = r.f64s(n)?;
            let bias = r.f64s(output_dim)?;
            let spec = LayerSpec::new(input_dim, output_dim, activation);
            let weights = Array2::from_shape_vec((output_dim, input_dim), weights)
                .map_err(|e| Error::Decode(e.to_string()))?;
            layers.push(
                DenseLayer::new(spec, weights, Array1::from(bias))
                    .map_err(|e| Error::Decode(e.to_string()))?,
            );
        }
        if r.pos != bytes.len() {
            return Err(Error::Decode(format!(
                "{} trailing bytes",
                bytes.len() - r.pos
            )));
        }
        DenseNetwork::from_layers(layers).map_err(|e| Error::Decode(e.to_string()))
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        fs::write(path, self.to_bytes()).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
        Self::from_bytes(&bytes).map_err(|e| Error::format(path, e.to_string()))
    }
}
