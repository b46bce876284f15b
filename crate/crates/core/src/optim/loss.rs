use ndarray::{Array, ArrayView1, ArrayView2, Dimension, Ix1, Ix2, Zip};

use crate::error::{Error, Result};
use crate::nn::check_binary;

/// Probabilities are clamped into `[PROB_CLAMP, 1 - PROB_CLAMP]` before logs.
pub const PROB_CLAMP: f64 = 1e-12;

/// A scalar loss together with its gradient with respect to the prediction.
#[derive(Debug, Clone, PartialEq)]
pub struct LossValue<D: Dimension> {
    pub value: f64,
    pub gradient: Array<f64, D>,
}

/// Mean over rows of the squared L2 distance between prediction and target.
/// Gradient is `2 (prediction - target) / rows`.
pub fn mse_loss(prediction: ArrayView2<f64>, target: ArrayView2<f64>) -> Result<LossValue<Ix2>> {
    if prediction.dim() != target.dim() {
        return Err(Error::shape(
            "mse operands",
            format!("{:?}", target.dim()),
            format!("{:?}", prediction.dim()),
        ));
    }
    let rows = prediction.nrows();
    if rows == 0 {
        return Err(Error::Empty("mse batch"));
    }
    let n = rows as f64;
    let diff = &prediction - &target;
    let value = diff.iter().map(|d| d * d).sum::<f64>() / n;
    let gradient = diff * (2.0 / n);
    Ok(LossValue { value, gradient })
}

/// Mean binary cross-entropy (the usual positive quantity) of predicted
/// probabilities against 0/1 labels.
pub fn cross_entropy(
    predicted_prob: ArrayView1<f64>,
    labels: ArrayView1<f64>,
) -> Result<LossValue<Ix1>> {
    if predicted_prob.len() != labels.len() {
        return Err(Error::shape(
            "cross-entropy operands",
            labels.len(),
            predicted_prob.len(),
        ));
    }
    if labels.is_empty() {
        return Err(Error::Empty("cross-entropy batch"));
    }
    check_binary(labels.iter().copied())?;
    let n = labels.len() as f64;
    let mut value = 0.0;
    let mut gradient = Array::zeros(labels.len());
    Zip::from(&mut gradient)
        .and(&predicted_prob)
        .and(&labels)
        .for_each(|g, &p, &s| {
            let p = p.clamp(PROB_CLAMP, 1.0 - PROB_CLAMP);
            value -= s * p.ln() + (1.0 - s) * (1.0 - p).ln();
            *g = (-s / p + (1.0 - s) / (1.0 - p)) / n;
        });
    Ok(LossValue {
        value: value / n,
        gradient,
    })
}
