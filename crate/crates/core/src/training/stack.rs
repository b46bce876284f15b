use std::path::{Path, PathBuf};

use ndarray::{Array2, ArrayView2};

use crate::error::{Error, Result};
use crate::nn::DenseNetwork;
use crate::par::{map_row_chunks, Execution};

/// Encoders applied in order. Every encoder except the most recently pushed
/// one is frozen; the empty stack is the identity map.
#[derive(Debug, Clone, PartialEq)]
pub struct EncoderStack {
    input_dim: usize,
    encoders: Vec<DenseNetwork>,
}

impl EncoderStack {
    pub fn new(input_dim: usize) -> Self {
        Self {
            input_dim,
            encoders: Vec::new(),
        }
    }

    pub fn input_dim(&self) -> usize {
        self.input_dim
    }

    pub fn output_dim(&self) -> usize {
        self.encoders
            .last()
            .map_or(self.input_dim, DenseNetwork::output_dim)
    }

    pub fn len(&self) -> usize {
        self.encoders.len()
    }

    pub fn is_empty(&self) -> bool {
        self.encoders.is_empty()
    }

    pub fn encoders(&self) -> &[DenseNetwork] {
        &self.encoders
    }

    /// Freezes the current top encoder and appends `encoder` as the new
    /// trainable top.
    pub fn push(&mut self, mut encoder: DenseNetwork) -> Result<()> {
        if encoder.input_dim() != self.output_dim() {
            return Err(Error::shape(
                "stack push",
                self.output_dim(),
                encoder.input_dim(),
            ));
        }
        if let Some(top) = self.encoders.last_mut() {
            top.freeze();
        }
        encoder.set_frozen(false);
        self.encoders.push(encoder);
        Ok(())
    }

    pub fn freeze_all(&mut self) {
        for e in &mut self.encoders {
            e.freeze();
        }
    }

    /// The trainable top encoder, if there is one.
    pub fn trainable_mut(&mut self) -> Option<&mut DenseNetwork> {
        self.encoders.last_mut().filter(|e| !e.is_frozen())
    }

    pub fn top(&self) -> Option<&DenseNetwork> {
        self.encoders.last()
    }

    fn check(&self, x: &ArrayView2<f64>) -> Result<()> {
        if x.ncols() != self.input_dim {
            return Err(Error::shape("stack input", self.input_dim, x.ncols()));
        }
        Ok(())
    }

    pub fn encode(&self, x: ArrayView2<f64>) -> Result<Array2<f64>> {
        self.encode_with(Execution::default(), x)
    }

    /// Sequential composition of every encoder, evaluated in row chunks.
    pub fn encode_with(&self, exec: Execution, x: ArrayView2<f64>) -> Result<Array2<f64>> {
        self.check(&x)?;
        map_row_chunks(exec, x, |chunk| {
            let mut out = chunk.to_owned();
            for e in &self.encoders {
                out = e.predict(out.view())?;
            }
            Ok(out)
        })
    }

    pub fn encoder_path(dir: &Path, index: usize) -> PathBuf {
        dir.join(format!("encoder_{index:02}.cnsr"))
    }

    /// Writes one container per encoder into `dir`.
    pub fn save(&self, dir: &Path) -> Result<Vec<PathBuf>> {
        self.encoders
            .iter()
            .enumerate()
            .map(|(i, e)| {
                let p = Self::encoder_path(dir, i);
                e.save(&p)?;
                Ok(p)
            })
            .collect()
    }

    /// Loads `count` encoders saved by [`Self::save`]; all come back frozen.
    pub fn load(dir: &Path, input_dim: usize, count: usize) -> Result<Self> {
        let mut stack = EncoderStack::new(input_dim);
        for i in 0..count {
            let p = Self::encoder_path(dir, i);
            let e = DenseNetwork::load(&p)?;
            stack
                .push(e)
                .map_err(|err| Error::format(&p, err.to_string()))?;
        }
        stack.freeze_all();
        Ok(stack)
    }
}

/// `decoder(stack(x))`, the censored data in the original space.
pub fn censor_original(
    stack: &EncoderStack,
    decoder: &DenseNetwork,
    x: ArrayView2<f64>,
) -> Result<Array2<f64>> {
    if decoder.input_dim() != stack.output_dim() {
        return Err(Error::shape(
            "decoder input",
            stack.output_dim(),
            decoder.input_dim(),
        ));
    }
    stack.check(&x)?;
    map_row_chunks(Execution::default(), x, |chunk| {
        let z = stack.encode_with(Execution::Sequential, chunk)?;
        decoder.predict(z.view())
    })
}
