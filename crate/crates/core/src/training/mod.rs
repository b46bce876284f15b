//! Actor/adversary trainers.
//!
//! * [`train_uncensored`]: plain autoencoder; a detached monitor adversary
//!   reports how much of `S` the latent code carries but never feeds back.
//! * [`train_alfr`]: the joint objective `mse + α·L_adv` with the actor and
//!   adversary updated in turns.
//! * [`train_alfr_ds`]: dampened concurrent updates with stacked encoders,
//!   stopping once a fully trained adversary scores at or below the
//!   configured threshold or the stack budget runs out.
//!
//! Sign convention: losses are stored as the usual positive cross-entropy.
//! The adversary descends it; the actor ascends it through the encoder. The
//! only place that negates is [`actor_latent_gradient`].

mod alfr;
mod alfr_ds;
mod stack;

pub use alfr::{
    train_alfr, train_alfr_observed, train_uncensored, train_uncensored_observed, AlfrConfig,
    Interleave,
};
pub use alfr_ds::{train_alfr_ds, AlfrDsConfig, AlfrDsTrainer, DampeningMode, DsGradients};
pub use stack::{censor_original, EncoderStack};

use std::time::Instant;

use ndarray::{Array2, ArrayView1, ArrayView2, Axis, Ix1};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fairness::{accuracy, dampening, DEFAULT_DECISION_THRESHOLD};
use crate::nn::{Activation, DenseNetwork, ForwardCache, LayerSpec};
use crate::optim::{cross_entropy, AdamConfig, AdamState, LossValue};

/// Network shapes shared by every trainer.
///
/// Each encoder has exactly one hidden layer. The first encoder maps the data
/// width to `latent_dim`; any further stacked encoder maps `latent_dim` to
/// `latent_dim`, so the decoder and adversary fit every stack depth.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Architecture {
    pub latent_dim: usize,
    /// Encoder hidden width; `None` means `latent_dim`.
    pub encoder_hidden: Option<usize>,
    pub hidden_activation: Activation,
    pub latent_activation: Activation,
    pub decoder_hidden: Vec<usize>,
    pub decoder_output_activation: Activation,
    /// Empty means a logistic-regression adversary.
    pub adversary_hidden: Vec<usize>,
}

impl Default for Architecture {
    fn default() -> Self {
        Self {
            latent_dim: 8,
            encoder_hidden: None,
            hidden_activation: Activation::Relu,
            latent_activation: Activation::Identity,
            decoder_hidden: vec![64],
            decoder_output_activation: Activation::Identity,
            adversary_hidden: vec![64],
        }
    }
}

impl Architecture {
    pub fn validate(&self) -> Result<()> {
        let widths = self
            .decoder_hidden
            .iter()
            .chain(&self.adversary_hidden)
            .chain(self.encoder_hidden.iter());
        if self.latent_dim == 0 || widths.into_iter().any(|&w| w == 0) {
            return Err(Error::Config("architecture widths must be positive".into()));
        }
        Ok(())
    }

    pub fn encoder_specs(&self, input_dim: usize) -> Vec<LayerSpec> {
        let hidden = self.encoder_hidden.unwrap_or(self.latent_dim);
        LayerSpec::chain(
            input_dim,
            &[hidden],
            self.latent_dim,
            self.hidden_activation,
            self.latent_activation,
        )
    }

    pub fn decoder_specs(&self, data_dim: usize) -> Vec<LayerSpec> {
        LayerSpec::chain(
            self.latent_dim,
            &self.decoder_hidden,
            data_dim,
            self.hidden_activation,
            self.decoder_output_activation,
        )
    }

    pub fn adversary_specs(&self) -> Vec<LayerSpec> {
        LayerSpec::chain(
            self.latent_dim,
            &self.adversary_hidden,
            1,
            self.hidden_activation,
            Activation::Sigmoid,
        )
    }
}

/// Weighting of the reconstruction term inside the actor's gradient.
///
/// Recorded losses always use the row-sum definition; this only rescales
/// the gradient that reaches the decoder and encoder, which changes how
/// strongly the adversary's term competes with reconstruction.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ReconstructionLoss {
    /// Squared error summed over features, averaged over rows.
    #[default]
    RowSum,
    /// Squared error averaged over every element: row-sum divided by width.
    ElementMean,
}

impl ReconstructionLoss {
    pub(crate) fn gradient(self, mut grad: Array2<f64>) -> Array2<f64> {
        if self == ReconstructionLoss::ElementMean {
            let width = grad.ncols() as f64;
            grad /= width;
        }
        grad
    }
}

/// Called with each finished epoch; an error stops training.
pub type EpochObserver<'a> = &'a mut dyn FnMut(&MetricsRecord) -> Result<()>;

/// One epoch of training diagnostics.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsRecord {
    /// 1-based, counted across stacks.
    pub epoch: usize,
    /// 0-based index of the encoder being trained.
    pub stack_index: usize,
    /// Row-weighted mean of the per-batch reconstruction loss.
    pub reconstruction_mse: f64,
    /// Row-weighted mean of the per-batch adversary cross-entropy.
    pub adversary_cross_entropy: f64,
    /// Unweighted mean of the per-batch dampening values.
    pub batch_mean_dampening: f64,
    /// Seconds since the trainer started. Not part of the reproducible record.
    pub wall_time: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TerminatedBy {
    ConstraintMet,
    Deadline,
}

impl std::fmt::Display for TerminatedBy {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            TerminatedBy::ConstraintMet => "constraint_met",
            TerminatedBy::Deadline => "deadline",
        })
    }
}

/// Outcome of one stacked-encoder round.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StackSummary {
    pub stack_index: usize,
    pub epochs: usize,
    /// Full training-set accuracy of the fine-tuned adversary.
    pub adversary_accuracy: f64,
    pub constraint_met: bool,
}

#[derive(Debug, Clone)]
pub struct TrainReport {
    pub metrics: Vec<MetricsRecord>,
    pub stack: EncoderStack,
    pub decoder: DenseNetwork,
    pub adversary: DenseNetwork,
    pub terminated_by: TerminatedBy,
    pub stacks: Vec<StackSummary>,
}

impl TrainReport {
    pub fn reconstruction_curve(&self) -> Vec<f64> {
        self.metrics.iter().map(|m| m.reconstruction_mse).collect()
    }
}

/// A network with its optimizer state.
#[derive(Debug, Clone, PartialEq)]
pub(crate) struct Player {
    pub net: DenseNetwork,
    pub opt: AdamState,
}

impl Player {
    pub fn init(specs: &[LayerSpec], seed: u64, config: AdamConfig) -> Result<Self> {
        let net = DenseNetwork::init(specs, seed)?;
        let opt = AdamState::new(&net, config);
        Ok(Self { net, opt })
    }
}

/// Adversary forward pass with its loss and batch accuracy.
pub(crate) struct AdversaryPass {
    pub cache: ForwardCache,
    pub loss: LossValue<Ix1>,
    pub accuracy: f64,
}

impl AdversaryPass {
    pub fn run(
        adversary: &DenseNetwork,
        latent: ArrayView2<f64>,
        labels: ArrayView1<f64>,
    ) -> Result<Self> {
        let cache = adversary.forward(latent)?;
        let probs = cache.output().column(0);
        let loss = cross_entropy(probs, labels)?;
        let accuracy = accuracy(probs, labels, DEFAULT_DECISION_THRESHOLD)?;
        Ok(Self {
            cache,
            loss,
            accuracy,
        })
    }

    /// Cross-entropy gradient shaped like the adversary output.
    pub fn output_gradient(&self) -> Array2<f64> {
        self.loss.gradient.clone().insert_axis(Axis(1))
    }

    pub fn dampening(&self, labels: ArrayView1<f64>) -> Result<f64> {
        Ok(dampening(self.accuracy, labels)?.value())
    }
}

/// Latent-code gradient of the actor objective `mse + weight · L_adv`, where
/// `L_adv` is the negated cross-entropy. `ce_latent_grad` is the gradient of
/// the positive cross-entropy, so it enters with a minus sign. A zero weight
/// returns `mse_latent_grad` untouched.
pub(crate) fn actor_latent_gradient(
    mut mse_latent_grad: Array2<f64>,
    ce_latent_grad: &Array2<f64>,
    weight: f64,
) -> Array2<f64> {
    if weight != 0.0 {
        mse_latent_grad.scaled_add(-weight, ce_latent_grad);
    }
    mse_latent_grad
}

pub(crate) fn ensure_finite(
    value: f64,
    what: &'static str,
    epoch: usize,
    stack: usize,
) -> Result<()> {
    if value.is_finite() {
        Ok(())
    } else {
        Err(Error::NonFinite { what, epoch, stack })
    }
}

pub(crate) fn validate_common(
    batch_size: usize,
    optimizers: &[&AdamConfig],
    arch: &Architecture,
) -> Result<()> {
    if batch_size == 0 {
        return Err(Error::Config("batch_size must be at least 1".into()));
    }
    for o in optimizers {
        o.validate()?;
    }
    arch.validate()
}

/// Running sums for one epoch.
#[derive(Debug, Default)]
pub(crate) struct EpochAccumulator {
    rows: usize,
    mse: f64,
    ce: f64,
    dampening: f64,
    batches: usize,
}

impl EpochAccumulator {
    pub fn add(&mut self, rows: usize, mse: f64, ce: f64, dampening: f64) {
        self.rows += rows;
        self.mse += mse * rows as f64;
        self.ce += ce * rows as f64;
        self.dampening += dampening;
        self.batches += 1;
    }

    pub fn finish(self, epoch: usize, stack_index: usize, started: Instant) -> MetricsRecord {
        let rows = self.rows.max(1) as f64;
        MetricsRecord {
            epoch,
            stack_index,
            reconstruction_mse: self.mse / rows,
            adversary_cross_entropy: self.ce / rows,
            batch_mean_dampening: self.dampening / self.batches.max(1) as f64,
            wall_time: started.elapsed().as_secs_f64(),
        }
    }
}
