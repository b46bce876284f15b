use ndarray::{Array1, Array2};
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::LabeledDataset;
use crate::error::{Error, Result};
use crate::rng::rng_from;

/// Small datasets with a known relationship between `X` and `S`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SyntheticKind {
    /// Feature 0 is `S` itself; the rest is standard-normal noise.
    LeakyFeature,
    /// `S` is a fair coin independent of standard-normal `X`.
    NoiseBit,
    /// `S = [x0 > 0] xor [x1 > 0]` on standard-normal `X`.
    XorProtected,
}

pub fn make_synthetic(
    kind: SyntheticKind,
    n: usize,
    dim: usize,
    seed: u64,
) -> Result<LabeledDataset> {
    if n < 2 || dim < 2 {
        return Err(Error::Config(format!(
            "synthetic data needs n >= 2 and dim >= 2, got {n} x {dim}"
        )));
    }
    let mut rng = rng_from(seed);
    let mut x = Array2::<f64>::zeros((n, dim));
    let mut s = Array1::<f64>::zeros(n);
    for i in 0..n {
        for j in 0..dim {
            x[[i, j]] = rng.sample(StandardNormal);
        }
        s[i] = match kind {
            SyntheticKind::LeakyFeature => {
                let bit = f64::from(u8::from(rng.random::<bool>()));
                x[[i, 0]] = bit;
                bit
            }
            SyntheticKind::NoiseBit => f64::from(u8::from(rng.random::<bool>())),
            SyntheticKind::XorProtected => {
                f64::from(u8::from((x[[i, 0]] > 0.0) ^ (x[[i, 1]] > 0.0)))
            }
        };
    }
    let name = match kind {
        SyntheticKind::LeakyFeature => "leaky_feature",
        SyntheticKind::NoiseBit => "noise_bit",
        SyntheticKind::XorProtected => "xor_protected",
    };
    LabeledDataset::new(name, x, s)
}
