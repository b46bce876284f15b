//! Dense feed-forward networks with exact reverse-mode gradients.
//!
//! All math is `f64`. Layers compute `f(x Wᵀ + b)` on row-major batches
//! (one sample per row).

mod activation;
mod network;
mod serialize;

pub use activation::{sigmoid, Activation};
pub use network::{DenseLayer, DenseNetwork, ForwardCache, GradientSet, LayerGradient, LayerSpec};
pub use serialize::{FORMAT_VERSION, MAGIC};

use ndarray::{Array1, Array2};

use crate::error::{Error, Result};

/// A mini-batch of inputs with optional binary labels.
#[derive(Debug, Clone, PartialEq)]
pub struct Batch {
    pub inputs: Array2<f64>,
    pub labels: Option<Array1<f64>>,
}

impl Batch {
    pub fn new(inputs: Array2<f64>, labels: Option<Array1<f64>>) -> Result<Self> {
        if inputs.nrows() == 0 {
            return Err(Error::Empty("batch"));
        }
        if let Some(l) = &labels {
            if l.len() != inputs.nrows() {
                return Err(Error::shape("batch labels", inputs.nrows(), l.len()));
            }
            check_binary(l.iter().copied())?;
        }
        Ok(Self { inputs, labels })
    }

    pub fn len(&self) -> usize {
        self.inputs.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.inputs.nrows() == 0
    }
}

pub(crate) fn check_binary(labels: impl IntoIterator<Item = f64>) -> Result<()> {
    for (index, value) in labels.into_iter().enumerate() {
        if value != 0.0 && value != 1.0 {
            return Err(Error::InvalidLabel { index, value });
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[test]
    fn batch_validates_labels() {
        let x = array![[1.0], [2.0]];
        assert!(Batch::new(x.clone(), Some(array![0.0, 1.0])).is_ok());
        assert!(matches!(
            Batch::new(x.clone(), Some(array![0.0, 0.5])),
            Err(Error::InvalidLabel { index: 1, .. })
        ));
        assert!(Batch::new(x, Some(array![1.0])).is_err());
        assert!(Batch::new(Array2::zeros((0, 3)), None).is_err());
    }
}
