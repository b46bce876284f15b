//! Post-hoc probes: fresh classifiers trained to recover `S` from a frozen
//! representation.

use std::fmt;

use ndarray::{Array1, Array2, ArrayView1, ArrayView2, Axis};
use serde::{Deserialize, Serialize};

use crate::data::{permutation, split, LabeledDataset, SplitSpec};
use crate::error::{Error, Result};
use crate::fairness::{accuracy, DEFAULT_DECISION_THRESHOLD};
use crate::nn::{Activation, DenseNetwork, LayerSpec};
use crate::optim::{adam_step, cross_entropy, mse_loss, AdamConfig, AdamState};
use crate::par::{map_ordered, map_row_chunks, Execution};
use crate::rng::derive_indexed;
use crate::training::{censor_original, EncoderStack};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProbeKind {
    /// Logistic regression: no hidden layer.
    Linear,
    Mlp,
}

impl fmt::Display for ProbeKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ProbeKind::Linear => "linear",
            ProbeKind::Mlp => "mlp",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ProbeSpec {
    pub kind: ProbeKind,
    /// Upper bound on probe epochs.
    pub epochs: usize,
    /// Early stopping is not considered before this many epochs.
    pub min_epochs: usize,
    pub batch_size: usize,
    /// Relu widths for `Mlp`; ignored for `Linear`.
    pub hidden: Vec<usize>,
    pub learning_rate: f64,
    /// Share of the evaluation rows held out to score each probe.
    pub holdout_fraction: f64,
    pub seed: u64,
}

impl Default for ProbeSpec {
    fn default() -> Self {
        Self {
            kind: ProbeKind::Linear,
            epochs: 30,
            min_epochs: 10,
            batch_size: 64,
            hidden: vec![64],
            learning_rate: 1e-3,
            holdout_fraction: 0.3,
            seed: 0,
        }
    }
}

/// Training-accuracy change below which a probe counts as converged.
const PLATEAU_DELTA: f64 = 1e-4;
const PLATEAU_WINDOW: usize = 3;

impl ProbeSpec {
    pub fn linear(seed: u64) -> Self {
        Self {
            kind: ProbeKind::Linear,
            seed,
            ..Self::default()
        }
    }

    pub fn mlp(seed: u64) -> Self {
        Self {
            kind: ProbeKind::Mlp,
            seed,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.epochs == 0 || self.batch_size == 0 {
            return Err(Error::Config(
                "probe epochs and batch_size must be positive".into(),
            ));
        }
        if self.kind == ProbeKind::Mlp && (self.hidden.is_empty() || self.hidden.contains(&0)) {
            return Err(Error::Config(
                "mlp probe needs at least one positive hidden width".into(),
            ));
        }
        if !(self.holdout_fraction > 0.0 && self.holdout_fraction < 1.0) {
            return Err(Error::Config(format!(
                "probe holdout_fraction must be in (0, 1), got {}",
                self.holdout_fraction
            )));
        }
        AdamConfig {
            learning_rate: self.learning_rate,
            ..AdamConfig::default()
        }
        .validate()
    }

    pub fn layer_specs(&self, input_dim: usize) -> Vec<LayerSpec> {
        let hidden: &[usize] = match self.kind {
            ProbeKind::Linear => &[],
            ProbeKind::Mlp => &self.hidden,
        };
        LayerSpec::chain(input_dim, hidden, 1, Activation::Relu, Activation::Sigmoid)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalResult {
    pub probe_kind: ProbeKind,
    pub mean_accuracy: f64,
    /// Population standard deviation over the runs.
    pub std_accuracy: f64,
    pub runs: usize,
}

/// A trained probe with the per-feature standardization it was fitted under.
#[derive(Debug, Clone, PartialEq)]
pub struct Probe {
    pub network: DenseNetwork,
    pub mean: Array1<f64>,
    pub scale: Array1<f64>,
    pub epochs_run: usize,
}

impl Probe {
    fn standardize(&self, x: ArrayView2<f64>) -> Array2<f64> {
        (&x - &self.mean) / &self.scale
    }

    pub fn predict(&self, x: ArrayView2<f64>) -> Result<Array1<f64>> {
        if x.ncols() != self.mean.len() {
            return Err(Error::shape("probe input", self.mean.len(), x.ncols()));
        }
        Ok(self
            .network
            .predict(self.standardize(x).view())?
            .column(0)
            .to_owned())
    }

    pub fn accuracy(&self, x: ArrayView2<f64>, labels: ArrayView1<f64>) -> Result<f64> {
        accuracy(self.predict(x)?.view(), labels, DEFAULT_DECISION_THRESHOLD)
    }
}

/// Fits a probe by Adam on cross-entropy. Features are standardized with
/// their column mean and deviation first; constant columns pass through
/// centred. Training stops at `spec.epochs`, or earlier once training
/// accuracy has moved less than 1e-4 over three epochs past `min_epochs`.
pub fn train_probe(
    representation: ArrayView2<f64>,
    labels: ArrayView1<f64>,
    spec: &ProbeSpec,
) -> Result<Probe> {
    spec.validate()?;
    if representation.nrows() != labels.len() {
        return Err(Error::shape(
            "probe rows",
            labels.len(),
            representation.nrows(),
        ));
    }
    if labels.is_empty() {
        return Err(Error::Empty("probe training rows"));
    }
    crate::nn::check_binary(labels.iter().copied())?;

    let mean = representation.mean_axis(Axis(0)).expect("nonempty");
    let scale = representation
        .std_axis(Axis(0), 0.0)
        .mapv(|s| if s > 1e-12 { s } else { 1.0 });
    let x = (&representation - &mean) / &scale;

    let mut network = DenseNetwork::init(
        &spec.layer_specs(x.ncols()),
        derive_indexed(spec.seed, "probe", 0),
    )?;
    let mut opt = AdamState::new(
        &network,
        AdamConfig {
            learning_rate: spec.learning_rate,
            ..AdamConfig::default()
        },
    );
    let mut history: Vec<f64> = Vec::with_capacity(spec.epochs);
    for epoch in 0..spec.epochs {
        let order = permutation(
            x.nrows(),
            derive_indexed(spec.seed, "probe_epoch", epoch as u64),
        );
        for rows in order.chunks(spec.batch_size) {
            let xb = x.select(Axis(0), rows);
            let sb = labels.select(Axis(0), rows);
            let cache = network.forward(xb.view())?;
            let loss = cross_entropy(cache.output().column(0), sb.view())?;
            if !loss.value.is_finite() {
                return Err(Error::NonFinite {
                    what: "probe loss",
                    epoch: epoch + 1,
                    stack: 0,
                });
            }
            let g = network.param_gradients(&cache, loss.gradient.insert_axis(Axis(1)).view())?;
            adam_step(&mut network, &g, &mut opt)?;
        }
        let probs = network.predict(x.view())?;
        history.push(accuracy(
            probs.column(0),
            labels,
            DEFAULT_DECISION_THRESHOLD,
        )?);
        let t = history.len();
        if t >= spec.min_epochs.max(PLATEAU_WINDOW + 1)
            && (history[t - 1] - history[t - 1 - PLATEAU_WINDOW]).abs() < PLATEAU_DELTA
        {
            break;
        }
    }
    Ok(Probe {
        network,
        mean,
        scale,
        epochs_run: history.len(),
    })
}

fn mean_std(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
    (mean, var.sqrt())
}

/// Held-out probe accuracies on an already encoded dataset, one per repeat.
/// Each repeat draws its own train/holdout partition and probe seed.
pub fn probe_accuracies(
    exec: Execution,
    encoded: &LabeledDataset,
    spec: &ProbeSpec,
    repeats: usize,
) -> Result<Vec<f64>> {
    spec.validate()?;
    if repeats == 0 {
        return Err(Error::Config("repeats must be at least 1".into()));
    }
    if encoded.is_empty() {
        return Err(Error::Empty("evaluation data"));
    }
    let seeds: Vec<u64> = (0..repeats as u64).collect();
    map_ordered(exec, &seeds, |&r| {
        let (train, test) = split(
            encoded,
            SplitSpec {
                train_fraction: 1.0 - spec.holdout_fraction,
                seed: derive_indexed(spec.seed, "holdout", r),
            },
        )?;
        let run_spec = ProbeSpec {
            seed: derive_indexed(spec.seed, "repeat", r),
            ..spec.clone()
        };
        let probe = train_probe(train.features(), train.protected(), &run_spec)?;
        probe.accuracy(test.features(), test.protected())
    })
    .into_iter()
    .collect()
}

pub fn evaluate_censoring(
    stack: &EncoderStack,
    eval_data: &LabeledDataset,
    specs: &[ProbeSpec],
    repeats: usize,
) -> Result<Vec<EvalResult>> {
    evaluate_censoring_with(Execution::default(), stack, eval_data, specs, repeats)
}

/// Encodes `eval_data` through `stack` and scores every probe spec over
/// `repeats` seeded runs. Results follow the order of `specs`.
pub fn evaluate_censoring_with(
    exec: Execution,
    stack: &EncoderStack,
    eval_data: &LabeledDataset,
    specs: &[ProbeSpec],
    repeats: usize,
) -> Result<Vec<EvalResult>> {
    if eval_data.is_empty() {
        return Err(Error::Empty("evaluation data"));
    }
    let encoded = eval_data.with_features(stack.encode_with(exec, eval_data.features())?)?;
    specs
        .iter()
        .map(|spec| {
            let accs = probe_accuracies(exec, &encoded, spec, repeats)?;
            let (mean_accuracy, std_accuracy) = mean_std(&accs);
            Ok(EvalResult {
                probe_kind: spec.kind,
                mean_accuracy,
                std_accuracy,
                runs: accs.len(),
            })
        })
        .collect()
}

/// Probes trained on `stack(probe_train)` and scored on `stack(probe_test)`,
/// `repeats` seeds per probe. `ProbeSpec::holdout_fraction` is not used here.
pub fn evaluate_censoring_on(
    exec: Execution,
    stack: &EncoderStack,
    probe_train: &LabeledDataset,
    probe_test: &LabeledDataset,
    specs: &[ProbeSpec],
    repeats: usize,
) -> Result<Vec<EvalResult>> {
    if probe_train.is_empty() || probe_test.is_empty() {
        return Err(Error::Empty("evaluation data"));
    }
    if repeats == 0 {
        return Err(Error::Config("repeats must be at least 1".into()));
    }
    let train = probe_train.with_features(stack.encode_with(exec, probe_train.features())?)?;
    let test = probe_test.with_features(stack.encode_with(exec, probe_test.features())?)?;
    let seeds: Vec<u64> = (0..repeats as u64).collect();
    specs
        .iter()
        .map(|spec| {
            spec.validate()?;
            let accs = map_ordered(exec, &seeds, |&r| {
                let run_spec = ProbeSpec {
                    seed: derive_indexed(spec.seed, "repeat", r),
                    ..spec.clone()
                };
                train_probe(train.features(), train.protected(), &run_spec)?
                    .accuracy(test.features(), test.protected())
            })
            .into_iter()
            .collect::<Result<Vec<f64>>>()?;
            let (mean_accuracy, std_accuracy) = mean_std(&accs);
            Ok(EvalResult {
                probe_kind: spec.kind,
                mean_accuracy,
                std_accuracy,
                runs: accs.len(),
            })
        })
        .collect()
}

/// Mean over rows of `‖d(e(x)) − x‖²`.
pub fn reconstruction_error(
    stack: &EncoderStack,
    decoder: &DenseNetwork,
    eval_data: &LabeledDataset,
) -> Result<f64> {
    if eval_data.is_empty() {
        return Err(Error::Empty("evaluation data"));
    }
    let x = eval_data.features();
    let out = censor_original(stack, decoder, x)?;
    Ok(mse_loss(out.view(), x)?.value)
}

/// Same quantity as [`reconstruction_error`], accumulated chunk by chunk
/// without materializing the reconstruction.
pub fn reconstruction_error_chunked(
    exec: Execution,
    stack: &EncoderStack,
    decoder: &DenseNetwork,
    eval_data: &LabeledDataset,
) -> Result<f64> {
    if eval_data.is_empty() {
        return Err(Error::Empty("evaluation data"));
    }
    if decoder.input_dim() != stack.output_dim() {
        return Err(Error::shape(
            "decoder input",
            stack.output_dim(),
            decoder.input_dim(),
        ));
    }
    let x = eval_data.features();
    let per_row = map_row_chunks(exec, x, |chunk| {
        let z = stack.encode_with(Execution::Sequential, chunk)?;
        let y = decoder.predict(z.view())?;
        let sq = (&y - &chunk).mapv(|d| d * d).sum_axis(Axis(1));
        Ok::<_, Error>(sq.insert_axis(Axis(1)))
    })?;
    Ok(per_row.sum() / x.nrows() as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::{array, Array2};

    fn xor_data(n: usize) -> (Array2<f64>, Array1<f64>) {
        let x = Array2::from_shape_fn((n, 2), |(i, j)| {
            let a = ((i * 7919 + j * 104729) % 1000) as f64 / 500.0 - 1.0;
            if a.abs() < 0.05 {
                0.3
            } else {
                a
            }
        });
        let s = x
            .rows()
            .into_iter()
            .map(|r| f64::from((r[0] > 0.0) != (r[1] > 0.0)))
            .collect();
        (x, s)
    }

    #[test]
    fn separable_column_is_learned() {
        let s: Array1<f64> = (0..200).map(|i| f64::from(i % 3 == 0)).collect();
        let x = s.clone().insert_axis(Axis(1));
        let p = train_probe(x.view(), s.view(), &ProbeSpec::linear(1)).unwrap();
        assert_eq!(p.accuracy(x.view(), s.view()).unwrap(), 1.0);
    }

    #[test]
    fn constant_input_learns_prior() {
        let s: Array1<f64> = (0..100).map(|i| f64::from(i < 30)).collect();
        let x = Array2::zeros((100, 3));
        for spec in [ProbeSpec::linear(2), ProbeSpec::mlp(2)] {
            let p = train_probe(x.view(), s.view(), &spec).unwrap();
            assert!((p.accuracy(x.view(), s.view()).unwrap() - 0.7).abs() < 1e-12);
        }
    }

    #[test]
    fn xor_needs_mlp() {
        let (x, s) = xor_data(600);
        let lin = train_probe(x.view(), s.view(), &ProbeSpec::linear(3)).unwrap();
        let mlp = train_probe(
            x.view(),
            s.view(),
            &ProbeSpec {
                epochs: 200,
                learning_rate: 1e-2,
                ..ProbeSpec::mlp(3)
            },
        )
        .unwrap();
        let (la, ma) = (
            lin.accuracy(x.view(), s.view()).unwrap(),
            mlp.accuracy(x.view(), s.view()).unwrap(),
        );
        assert!(la < 0.65, "linear {la}");
        assert!(ma >= 0.9, "mlp {ma}");
    }

    #[test]
    fn single_repeat_has_zero_std() {
        let ds = LabeledDataset::new(
            "t",
            Array2::from_shape_fn((50, 2), |(i, j)| (i * (j + 1)) as f64),
            (0..50).map(|i| f64::from(i % 2 == 0)).collect(),
        )
        .unwrap();
        let r = evaluate_censoring(&EncoderStack::new(2), &ds, &[ProbeSpec::linear(0)], 1).unwrap();
        assert_eq!(r[0].std_accuracy, 0.0);
        assert_eq!(r[0].runs, 1);
    }

    #[test]
    fn chunked_reconstruction_matches() {
        let x = Array2::from_shape_fn((1300, 3), |(i, j)| ((i * 13 + j) % 17) as f64 / 17.0);
        let ds = LabeledDataset::new("t", x, Array1::zeros(1300)).unwrap();
        let mut stack = EncoderStack::new(3);
        stack
            .push(
                DenseNetwork::init(
                    &LayerSpec::chain(3, &[4], 2, Activation::Relu, Activation::Identity),
                    1,
                )
                .unwrap(),
            )
            .unwrap();
        let dec = DenseNetwork::init(
            &LayerSpec::chain(2, &[], 3, Activation::Relu, Activation::Sigmoid),
            2,
        )
        .unwrap();
        let a = reconstruction_error(&stack, &dec, &ds).unwrap();
        let b = reconstruction_error_chunked(Execution::Sequential, &stack, &dec, &ds).unwrap();
        assert!((a - b).abs() <= 1e-9 * a.max(1.0));
    }

    #[test]
    fn zero_decoder_gives_mean_square() {
        let x = array![[0.5, 1.0], [0.0, 0.25]];
        let ds = LabeledDataset::new("t", x, array![0.0, 1.0]).unwrap();
        let mut stack = EncoderStack::new(2);
        let enc = DenseNetwork::init(&[LayerSpec::new(2, 1, Activation::Identity)], 0).unwrap();
        stack.push(enc).unwrap();
        let mut dec = DenseNetwork::init(&[LayerSpec::new(1, 2, Activation::Identity)], 0).unwrap();
        dec.layers_mut()[0].weights_mut().fill(0.0);
        let expected = (0.25 + 1.0 + 0.0 + 0.0625) / 2.0;
        assert!((reconstruction_error(&stack, &dec, &ds).unwrap() - expected).abs() < 1e-15);
    }

    #[test]
    fn rejects_empty_and_bad_specs() {
        let ds =
            LabeledDataset::new("t", Array2::zeros((4, 2)), array![0.0, 1.0, 0.0, 1.0]).unwrap();
        let stack = EncoderStack::new(2);
        assert!(evaluate_censoring(&stack, &ds, &[ProbeSpec::linear(0)], 0).is_err());
        let bad = ProbeSpec {
            holdout_fraction: 1.0,
            ..ProbeSpec::linear(0)
        };
        assert!(evaluate_censoring(&stack, &ds, &[bad], 1).is_err());
    }
}
