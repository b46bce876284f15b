//! Guessing baseline, accuracy, dampening and the hypothesis-space test.

use ndarray::ArrayView1;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::nn::check_binary;

/// Probabilities at or above this value predict class 1.
pub const DEFAULT_DECISION_THRESHOLD: f64 = 0.5;

/// Best accuracy achievable from the label frequencies alone:
/// `max(#1, #0) / n`.
pub fn guess_accuracy(labels: ArrayView1<f64>) -> Result<f64> {
    if labels.is_empty() {
        return Err(Error::Empty("labels"));
    }
    check_binary(labels.iter().copied())?;
    let n = labels.len();
    let ones = labels.iter().filter(|&&s| s == 1.0).count();
    Ok(ones.max(n - ones) as f64 / n as f64)
}

/// Fraction of rows where `prob >= threshold` agrees with the label.
pub fn accuracy(
    predicted_prob: ArrayView1<f64>,
    labels: ArrayView1<f64>,
    decision_threshold: f64,
) -> Result<f64> {
    if predicted_prob.len() != labels.len() {
        return Err(Error::shape(
            "accuracy operands",
            labels.len(),
            predicted_prob.len(),
        ));
    }
    if labels.is_empty() {
        return Err(Error::Empty("labels"));
    }
    let hits = predicted_prob
        .iter()
        .zip(labels.iter())
        .filter(|(&p, &s)| (p >= decision_threshold) == (s == 1.0))
        .count();
    Ok(hits as f64 / labels.len() as f64)
}

/// A value in `[0, 1]` measuring how much a classifier beats informed guessing.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize, Deserialize)]
pub struct Dampening(f64);

impl Dampening {
    pub const ZERO: Dampening = Dampening(0.0);
    pub const ONE: Dampening = Dampening(1.0);

    pub fn new(value: f64) -> Result<Self> {
        if (0.0..=1.0).contains(&value) {
            Ok(Dampening(value))
        } else {
            Err(Error::Config(format!("dampening {value} outside [0, 1]")))
        }
    }

    pub fn value(self) -> f64 {
        self.0
    }

    /// `1 - δ`, the adversary's step weight.
    pub fn complement(self) -> f64 {
        1.0 - self.0
    }
}

/// `max(0, acc - g) / (1 - g)` with `g` the guessing accuracy of `labels`;
/// zero when the labels are a single class.
pub fn dampening(acc: f64, labels: ArrayView1<f64>) -> Result<Dampening> {
    if !(0.0..=1.0).contains(&acc) {
        return Err(Error::Config(format!("accuracy {acc} outside [0, 1]")));
    }
    let g = guess_accuracy(labels)?;
    if g == 1.0 {
        return Ok(Dampening::ZERO);
    }
    // Rounding can nudge the ratio a hair past 1.
    Ok(Dampening(((acc - g).max(0.0) / (1.0 - g)).min(1.0)))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScoreKind {
    AdversaryAccuracy,
}

/// Acceptance test for an encoder: a fully trained adversary must score at
/// most `threshold`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HypothesisConstraint {
    pub score: ScoreKind,
    pub threshold: f64,
}

impl HypothesisConstraint {
    pub fn adversary_accuracy(threshold: f64) -> Result<Self> {
        let c = Self {
            score: ScoreKind::AdversaryAccuracy,
            threshold,
        };
        c.validate()?;
        Ok(c)
    }

    pub fn validate(&self) -> Result<()> {
        match self.score {
            ScoreKind::AdversaryAccuracy if (0.5..=1.0).contains(&self.threshold) => Ok(()),
            ScoreKind::AdversaryAccuracy => Err(Error::Config(format!(
                "accuracy threshold {} outside [0.5, 1]",
                self.threshold
            ))),
        }
    }
}

/// True iff `score <= T` (inclusive).
pub fn hypothesis_check(score: f64, constraint: &HypothesisConstraint) -> bool {
    score <= constraint.threshold
}
