use std::time::Instant;

use ndarray::{Array1, Array2, ArrayView2, Axis};
use serde::{Deserialize, Serialize};

use super::{
    actor_latent_gradient, ensure_finite, validate_common, AdversaryPass, Architecture,
    EncoderStack, EpochAccumulator, EpochObserver, MetricsRecord, Player, ReconstructionLoss,
    StackSummary, TerminatedBy, TrainReport,
};
use crate::data::{permutation, LabeledDataset};
use crate::error::{Error, Result};
use crate::fairness::{
    accuracy, hypothesis_check, HypothesisConstraint, DEFAULT_DECISION_THRESHOLD,
};
use crate::nn::{DenseNetwork, GradientSet};
use crate::optim::{adam_step, mse_loss, scaled_adam_step, AdamConfig, AdamState};
use crate::par::Execution;
use crate::rng::{derive_indexed, derive_seed};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AlfrDsConfig {
    /// Upper bound on the number of encoders; the deadline.
    pub max_stacks: usize,
    pub epochs_per_stack: usize,
    pub batch_size: usize,
    /// Without a constraint every stack runs to completion.
    pub constraint: Option<HypothesisConstraint>,
    pub architecture: Architecture,
    pub actor_optimizer: AdamConfig,
    pub adversary_optimizer: AdamConfig,
    /// Full-strength adversary epochs after each stack's inner loop.
    pub adversary_finetune_epochs: usize,
    pub reinit_adversary_per_stack: bool,
    pub reconstruction_loss: ReconstructionLoss,
    pub seed: u64,
}

impl Default for AlfrDsConfig {
    fn default() -> Self {
        Self {
            max_stacks: 1,
            epochs_per_stack: 30,
            batch_size: 128,
            constraint: None,
            architecture: Architecture::default(),
            actor_optimizer: AdamConfig::default(),
            adversary_optimizer: AdamConfig::default(),
            adversary_finetune_epochs: 2,
            reinit_adversary_per_stack: false,
            reconstruction_loss: ReconstructionLoss::RowSum,
            seed: 0,
        }
    }
}

impl AlfrDsConfig {
    pub fn validate(&self) -> Result<()> {
        if self.max_stacks == 0 {
            return Err(Error::Config("max_stacks must be at least 1".into()));
        }
        if self.epochs_per_stack == 0 {
            return Err(Error::Config("epochs_per_stack must be at least 1".into()));
        }
        if let Some(c) = &self.constraint {
            c.validate()?;
        }
        validate_common(
            self.batch_size,
            &[&self.actor_optimizer, &self.adversary_optimizer],
            &self.architecture,
        )
    }
}

/// Where a step's dampening value comes from.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum DampeningMode {
    /// From the adversary's accuracy on the batch.
    Measured,
    /// Pinned to a value in `[0, 1]`.
    Fixed(f64),
}

/// Everything one concurrent step needs, computed from the pre-step parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct DsGradients {
    pub encoder: GradientSet,
    pub decoder: GradientSet,
    pub adversary: GradientSet,
    pub dampening: f64,
    pub mse: f64,
    pub ce: f64,
}

/// Stepwise dampened trainer. [`train_alfr_ds`] drives it end to end; the
/// individual steps are public so callers can inspect or steer a run.
#[derive(Debug, Clone)]
pub struct AlfrDsTrainer<'a> {
    data: &'a LabeledDataset,
    config: AlfrDsConfig,
    stack: EncoderStack,
    encoder_opt: AdamState,
    /// Output of the frozen prefix on the training features; `None` while
    /// the prefix is empty.
    below: Option<Array2<f64>>,
    decoder: Player,
    adversary: Player,
    metrics: Vec<MetricsRecord>,
    stacks: Vec<StackSummary>,
    started: Instant,
}

impl<'a> AlfrDsTrainer<'a> {
    /// Initializes decoder and adversary and pushes the first encoder.
    pub fn new(data: &'a LabeledDataset, config: &AlfrDsConfig) -> Result<Self> {
        config.validate()?;
        if data.is_empty() {
            return Err(Error::Empty("training data"));
        }
        let arch = &config.architecture;
        let decoder = Player::init(
            &arch.decoder_specs(data.dim()),
            derive_seed(config.seed, "decoder"),
            config.actor_optimizer,
        )?;
        let adversary = Player::init(
            &arch.adversary_specs(),
            derive_seed(config.seed, "adversary"),
            config.adversary_optimizer,
        )?;
        let first = DenseNetwork::init(
            &arch.encoder_specs(data.dim()),
            derive_indexed(config.seed, "encoder", 0),
        )?;
        let mut stack = EncoderStack::new(data.dim());
        let encoder_opt = AdamState::new(&first, config.actor_optimizer);
        stack.push(first)?;
        Ok(Self {
            data,
            config: config.clone(),
            stack,
            encoder_opt,
            below: None,
            decoder,
            adversary,
            metrics: Vec::new(),
            stacks: Vec::new(),
            started: Instant::now(),
        })
    }

    pub fn stack(&self) -> &EncoderStack {
        &self.stack
    }

    pub fn decoder(&self) -> &DenseNetwork {
        &self.decoder.net
    }

    pub fn adversary(&self) -> &DenseNetwork {
        &self.adversary.net
    }

    pub fn metrics(&self) -> &[MetricsRecord] {
        &self.metrics
    }

    pub fn stack_summaries(&self) -> &[StackSummary] {
        &self.stacks
    }

    fn top_index(&self) -> usize {
        self.stack.len() - 1
    }

    fn top_input(&self) -> ArrayView2<'_, f64> {
        match &self.below {
            Some(b) => b.view(),
            None => self.data.features(),
        }
    }

    /// Gradients for the batch `rows` from the current parameters. Nothing is
    /// mutated.
    pub fn compute_step(&self, rows: &[usize], mode: DampeningMode) -> Result<DsGradients> {
        let top = self
            .stack
            .top()
            .filter(|e| !e.is_frozen())
            .ok_or(Error::Frozen)?;
        let input = self.top_input().select(Axis(0), rows);
        let target = self.data.features().select(Axis(0), rows);
        let labels: Array1<f64> = self.data.protected().select(Axis(0), rows);

        let enc = top.forward(input.view())?;
        let dec = self.decoder.net.forward(enc.output().view())?;
        let mse = mse_loss(dec.output().view(), target.view())?;
        let pass = AdversaryPass::run(&self.adversary.net, enc.output().view(), labels.view())?;
        let dampening = match mode {
            DampeningMode::Measured => pass.dampening(labels.view())?,
            DampeningMode::Fixed(d) if (0.0..=1.0).contains(&d) => d,
            DampeningMode::Fixed(d) => {
                return Err(Error::Config(format!("dampening {d} outside [0, 1]")))
            }
        };

        let (decoder, dz_mse) = self.decoder.net.backward(
            &dec,
            self.config
                .reconstruction_loss
                .gradient(mse.gradient)
                .view(),
        )?;
        let (adversary, dz_ce) = self
            .adversary
            .net
            .backward(&pass.cache, pass.output_gradient().view())?;
        let dz = actor_latent_gradient(dz_mse, &dz_ce, dampening);
        let encoder = top.param_gradients(&enc, dz.view())?;
        Ok(DsGradients {
            encoder,
            decoder,
            adversary,
            dampening,
            mse: mse.value,
            ce: pass.loss.value,
        })
    }

    /// Actor update: one Adam step each for the top encoder and the decoder.
    pub fn apply_actor(&mut self, g: &DsGradients) -> Result<()> {
        let top = self.stack.trainable_mut().ok_or(Error::Frozen)?;
        adam_step(top, &g.encoder, &mut self.encoder_opt)?;
        adam_step(&mut self.decoder.net, &g.decoder, &mut self.decoder.opt)
    }

    /// Adversary update scaled by `1 - δ`.
    pub fn apply_adversary(&mut self, g: &DsGradients) -> Result<()> {
        scaled_adam_step(
            &mut self.adversary.net,
            &g.adversary,
            &mut self.adversary.opt,
            1.0 - g.dampening,
        )
    }

    /// One concurrent step on `rows`.
    pub fn step(&mut self, rows: &[usize], mode: DampeningMode) -> Result<DsGradients> {
        let g = self.compute_step(rows, mode)?;
        let (epoch, stack) = (self.metrics.len() + 1, self.top_index());
        ensure_finite(g.mse, "reconstruction loss", epoch, stack)?;
        ensure_finite(g.ce, "adversary loss", epoch, stack)?;
        self.apply_actor(&g)?;
        self.apply_adversary(&g)?;
        Ok(g)
    }

    /// One pass over the shuffled training set; records and returns the
    /// epoch's metrics.
    pub fn run_epoch_with(&mut self, mode: DampeningMode) -> Result<MetricsRecord> {
        let global = self.metrics.len();
        let order = permutation(
            self.data.len(),
            derive_indexed(self.config.seed, "epoch", global as u64),
        );
        let mut acc = EpochAccumulator::default();
        for rows in order.chunks(self.config.batch_size) {
            let g = self.step(rows, mode)?;
            acc.add(rows.len(), g.mse, g.ce, g.dampening);
        }
        let record = acc.finish(global + 1, self.top_index(), self.started);
        self.metrics.push(record.clone());
        Ok(record)
    }

    pub fn run_epoch(&mut self) -> Result<MetricsRecord> {
        self.run_epoch_with(DampeningMode::Measured)
    }

    /// Freezes the top encoder, fine-tunes the adversary on the frozen
    /// representation, and scores it on the full training set.
    pub fn finish_stack(&mut self) -> Result<StackSummary> {
        let index = self.top_index();
        self.stack.freeze_all();
        let z = self.stack.encode(self.data.features())?;
        let labels = self.data.protected();
        let base = derive_indexed(self.config.seed, "finetune", index as u64);
        for e in 0..self.config.adversary_finetune_epochs {
            let order = permutation(self.data.len(), derive_indexed(base, "epoch", e as u64));
            for rows in order.chunks(self.config.batch_size) {
                let zb = z.select(Axis(0), rows);
                let sb = labels.select(Axis(0), rows);
                let pass = AdversaryPass::run(&self.adversary.net, zb.view(), sb.view())?;
                ensure_finite(
                    pass.loss.value,
                    "adversary fine-tune loss",
                    self.metrics.len(),
                    index,
                )?;
                let g = self
                    .adversary
                    .net
                    .param_gradients(&pass.cache, pass.output_gradient().view())?;
                adam_step(&mut self.adversary.net, &g, &mut self.adversary.opt)?;
            }
        }
        let probs = self.adversary.net.predict(z.view())?;
        let adversary_accuracy = accuracy(probs.column(0), labels, DEFAULT_DECISION_THRESHOLD)?;
        let constraint_met = self
            .config
            .constraint
            .as_ref()
            .is_some_and(|c| hypothesis_check(adversary_accuracy, c));
        let summary = StackSummary {
            stack_index: index,
            epochs: self
                .metrics
                .iter()
                .filter(|m| m.stack_index == index)
                .count(),
            adversary_accuracy,
            constraint_met,
        };
        self.stacks.push(summary.clone());
        Ok(summary)
    }

    /// Appends a fresh trainable encoder on top of the frozen stack.
    pub fn push_encoder(&mut self) -> Result<()> {
        let k = self.stack.len();
        let arch = &self.config.architecture;
        let encoder = DenseNetwork::init(
            &arch.encoder_specs(self.stack.output_dim()),
            derive_indexed(self.config.seed, "encoder", k as u64),
        )?;
        self.encoder_opt = AdamState::new(&encoder, self.config.actor_optimizer);
        self.stack.freeze_all();
        self.below = Some(
            self.stack
                .encode_with(Execution::default(), self.data.features())?,
        );
        self.stack.push(encoder)?;
        if self.config.reinit_adversary_per_stack {
            self.adversary = Player::init(
                &arch.adversary_specs(),
                derive_indexed(self.config.seed, "adversary", k as u64),
                self.config.adversary_optimizer,
            )?;
        }
        Ok(())
    }

    /// Runs stacks until the constraint holds or `max_stacks` is reached.
    pub fn run(self) -> Result<TrainReport> {
        self.run_observed(&mut |_| Ok(()))
    }

    /// [`Self::run`], calling `observe` after every epoch.
    pub fn run_observed(mut self, observe: EpochObserver<'_>) -> Result<TrainReport> {
        loop {
            for _ in 0..self.config.epochs_per_stack {
                let record = self.run_epoch()?;
                observe(&record)?;
            }
            let summary = self.finish_stack()?;
            if summary.constraint_met {
                return Ok(self.into_report(TerminatedBy::ConstraintMet));
            }
            if self.stack.len() >= self.config.max_stacks {
                return Ok(self.into_report(TerminatedBy::Deadline));
            }
            self.push_encoder()?;
        }
    }

    pub fn into_report(mut self, terminated_by: TerminatedBy) -> TrainReport {
        self.stack.freeze_all();
        TrainReport {
            metrics: self.metrics,
            stack: self.stack,
            decoder: self.decoder.net,
            adversary: self.adversary.net,
            terminated_by,
            stacks: self.stacks,
        }
    }
}

/// Dampened concurrent training with stacked encoders.
pub fn train_alfr_ds(data: &LabeledDataset, config: &AlfrDsConfig) -> Result<TrainReport> {
    AlfrDsTrainer::new(data, config)?.run()
}
