use std::time::Instant;

use ndarray::{Array1, Array2, Axis};
use serde::{Deserialize, Serialize};

use super::{
    actor_latent_gradient, ensure_finite, validate_common, AdversaryPass, Architecture,
    EncoderStack, EpochAccumulator, EpochObserver, MetricsRecord, Player, ReconstructionLoss,
    StackSummary, TerminatedBy, TrainReport,
};
use crate::data::{permutation, LabeledDataset};
use crate::error::{Error, Result};
use crate::fairness::{accuracy, DEFAULT_DECISION_THRESHOLD};
use crate::optim::{adam_step, mse_loss, AdamConfig};
use crate::rng::{derive_indexed, derive_seed};

/// How the baseline trainer alternates actor and adversary updates.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Interleave {
    /// Adversary step then actor step on every mini-batch.
    #[default]
    PerBatch,
    /// Whole epochs alternate, adversary first.
    PerEpoch,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AlfrConfig {
    pub alpha: f64,
    pub epochs: usize,
    pub batch_size: usize,
    pub architecture: Architecture,
    pub actor_optimizer: AdamConfig,
    pub adversary_optimizer: AdamConfig,
    pub interleave: Interleave,
    pub reconstruction_loss: ReconstructionLoss,
    pub seed: u64,
}

impl Default for AlfrConfig {
    fn default() -> Self {
        Self {
            alpha: 1.0,
            epochs: 30,
            batch_size: 128,
            architecture: Architecture::default(),
            actor_optimizer: AdamConfig::default(),
            adversary_optimizer: AdamConfig::default(),
            interleave: Interleave::PerBatch,
            reconstruction_loss: ReconstructionLoss::RowSum,
            seed: 0,
        }
    }
}

impl AlfrConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.alpha.is_finite() && self.alpha >= 0.0) {
            return Err(Error::Config(format!(
                "alpha must be finite and >= 0, got {}",
                self.alpha
            )));
        }
        if self.epochs == 0 {
            return Err(Error::Config("epochs must be at least 1".into()));
        }
        validate_common(
            self.batch_size,
            &[&self.actor_optimizer, &self.adversary_optimizer],
            &self.architecture,
        )
    }
}

struct Joint<'a> {
    data: &'a LabeledDataset,
    recon: ReconstructionLoss,
    encoder: Player,
    decoder: Player,
    adversary: Player,
}

impl<'a> Joint<'a> {
    fn new(data: &'a LabeledDataset, config: &'a AlfrConfig) -> Result<Self> {
        config.validate()?;
        if data.is_empty() {
            return Err(Error::Empty("training data"));
        }
        let arch = &config.architecture;
        let seed = config.seed;
        Ok(Self {
            data,
            recon: config.reconstruction_loss,
            encoder: Player::init(
                &arch.encoder_specs(data.dim()),
                derive_indexed(seed, "encoder", 0),
                config.actor_optimizer,
            )?,
            decoder: Player::init(
                &arch.decoder_specs(data.dim()),
                derive_seed(seed, "decoder"),
                config.actor_optimizer,
            )?,
            adversary: Player::init(
                &arch.adversary_specs(),
                derive_seed(seed, "adversary"),
                config.adversary_optimizer,
            )?,
        })
    }

    fn batch(&self, rows: &[usize]) -> (Array2<f64>, Array1<f64>) {
        (
            self.data.features().select(Axis(0), rows),
            self.data.protected().select(Axis(0), rows),
        )
    }

    fn adversary_turn(&mut self, x: &Array2<f64>, s: &Array1<f64>) -> Result<()> {
        let z = self.encoder.net.predict(x.view())?;
        let pass = AdversaryPass::run(&self.adversary.net, z.view(), s.view())?;
        let g = self
            .adversary
            .net
            .param_gradients(&pass.cache, pass.output_gradient().view())?;
        adam_step(&mut self.adversary.net, &g, &mut self.adversary.opt)
    }

    /// Actor pass: returns `(mse, ce, dampening)` measured before the update.
    fn actor_turn(
        &mut self,
        x: &Array2<f64>,
        s: &Array1<f64>,
        alpha: f64,
        update: bool,
    ) -> Result<(f64, f64, f64)> {
        let enc = self.encoder.net.forward(x.view())?;
        let dec = self.decoder.net.forward(enc.output().view())?;
        let mse = mse_loss(dec.output().view(), x.view())?;
        let pass = AdversaryPass::run(&self.adversary.net, enc.output().view(), s.view())?;
        let delta = pass.dampening(s.view())?;
        if update {
            let (dec_g, dz_mse) = self
                .decoder
                .net
                .backward(&dec, self.recon.gradient(mse.gradient).view())?;
            let dz = if alpha != 0.0 {
                let (_, dz_ce) = self
                    .adversary
                    .net
                    .backward(&pass.cache, pass.output_gradient().view())?;
                actor_latent_gradient(dz_mse, &dz_ce, alpha)
            } else {
                dz_mse
            };
            let enc_g = self.encoder.net.param_gradients(&enc, dz.view())?;
            adam_step(&mut self.encoder.net, &enc_g, &mut self.encoder.opt)?;
            adam_step(&mut self.decoder.net, &dec_g, &mut self.decoder.opt)?;
        }
        Ok((mse.value, pass.loss.value, delta))
    }

    fn finish(self, metrics: Vec<MetricsRecord>) -> Result<TrainReport> {
        let mut stack = EncoderStack::new(self.data.dim());
        stack.push(self.encoder.net)?;
        stack.freeze_all();
        let z = stack.encode(self.data.features())?;
        let probs = self.adversary.net.predict(z.view())?;
        let adversary_accuracy = accuracy(
            probs.column(0),
            self.data.protected(),
            DEFAULT_DECISION_THRESHOLD,
        )?;
        Ok(TrainReport {
            stacks: vec![StackSummary {
                stack_index: 0,
                epochs: metrics.len(),
                adversary_accuracy,
                constraint_met: false,
            }],
            metrics,
            stack,
            decoder: self.decoder.net,
            adversary: self.adversary.net,
            terminated_by: TerminatedBy::Deadline,
        })
    }
}

/// Baseline adversarial trainer on `mse + α·L_adv` with turn-taking updates.
pub fn train_alfr(data: &LabeledDataset, config: &AlfrConfig) -> Result<TrainReport> {
    train_alfr_observed(data, config, &mut |_| Ok(()))
}

/// [`train_alfr`], calling `observe` after every epoch.
pub fn train_alfr_observed(
    data: &LabeledDataset,
    config: &AlfrConfig,
    observe: EpochObserver<'_>,
) -> Result<TrainReport> {
    let mut t = Joint::new(data, config)?;
    let started = Instant::now();
    let mut metrics = Vec::with_capacity(config.epochs);
    for epoch in 0..config.epochs {
        let (adversary_on, actor_on) = match config.interleave {
            Interleave::PerBatch => (true, true),
            Interleave::PerEpoch => (epoch % 2 == 0, epoch % 2 == 1),
        };
        let order = permutation(
            data.len(),
            derive_indexed(config.seed, "epoch", epoch as u64),
        );
        let mut acc = EpochAccumulator::default();
        for rows in order.chunks(config.batch_size) {
            let (x, s) = t.batch(rows);
            if adversary_on {
                t.adversary_turn(&x, &s)?;
            }
            let (mse, ce, delta) = t.actor_turn(&x, &s, config.alpha, actor_on)?;
            ensure_finite(mse, "reconstruction loss", epoch + 1, 0)?;
            ensure_finite(ce, "adversary loss", epoch + 1, 0)?;
            acc.add(rows.len(), mse, ce, delta);
        }
        let record = acc.finish(epoch + 1, 0, started);
        observe(&record)?;
        metrics.push(record);
    }
    t.finish(metrics)
}

/// Plain autoencoder. `alpha` and `interleave` are ignored; a monitor
/// adversary is trained on the detached latent code after every actor step
/// so the cross-entropy column stays informative.
pub fn train_uncensored(data: &LabeledDataset, config: &AlfrConfig) -> Result<TrainReport> {
    train_uncensored_observed(data, config, &mut |_| Ok(()))
}

/// [`train_uncensored`], calling `observe` after every epoch.
pub fn train_uncensored_observed(
    data: &LabeledDataset,
    config: &AlfrConfig,
    observe: EpochObserver<'_>,
) -> Result<TrainReport> {
    let mut t = Joint::new(data, config)?;
    let started = Instant::now();
    let mut metrics = Vec::with_capacity(config.epochs);
    for epoch in 0..config.epochs {
        let order = permutation(
            data.len(),
            derive_indexed(config.seed, "epoch", epoch as u64),
        );
        let mut acc = EpochAccumulator::default();
        for rows in order.chunks(config.batch_size) {
            let (x, s) = t.batch(rows);
            let enc = t.encoder.net.forward(x.view())?;
            let dec = t.decoder.net.forward(enc.output().view())?;
            let mse = mse_loss(dec.output().view(), x.view())?;
            ensure_finite(mse.value, "reconstruction loss", epoch + 1, 0)?;
            let (dec_g, dz) = t
                .decoder
                .net
                .backward(&dec, t.recon.gradient(mse.gradient).view())?;
            let enc_g = t.encoder.net.param_gradients(&enc, dz.view())?;
            adam_step(&mut t.encoder.net, &enc_g, &mut t.encoder.opt)?;
            adam_step(&mut t.decoder.net, &dec_g, &mut t.decoder.opt)?;

            let pass = AdversaryPass::run(&t.adversary.net, enc.output().view(), s.view())?;
            let g = t
                .adversary
                .net
                .param_gradients(&pass.cache, pass.output_gradient().view())?;
            adam_step(&mut t.adversary.net, &g, &mut t.adversary.opt)?;
            ensure_finite(pass.loss.value, "adversary loss", epoch + 1, 0)?;
            acc.add(
                rows.len(),
                mse.value,
                pass.loss.value,
                pass.dampening(s.view())?,
            );
        }
        let record = acc.finish(epoch + 1, 0, started);
        observe(&record)?;
        metrics.push(record);
    }
    t.finish(metrics)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{make_synthetic, SyntheticKind};

    fn small_config(alpha: f64) -> AlfrConfig {
        AlfrConfig {
            alpha,
            epochs: 3,
            batch_size: 32,
            architecture: Architecture {
                latent_dim: 4,
                decoder_hidden: vec![8],
                adversary_hidden: vec![8],
                ..Architecture::default()
            },
            seed: 17,
            ..AlfrConfig::default()
        }
    }

    #[test]
    fn zero_alpha_matches_uncensored() {
        let data = make_synthetic(SyntheticKind::LeakyFeature, 300, 6, 2).unwrap();
        let a = train_alfr(&data, &small_config(0.0)).unwrap();
        let u = train_uncensored(&data, &small_config(0.0)).unwrap();
        assert_eq!(a.reconstruction_curve(), u.reconstruction_curve());
        assert_eq!(a.stack, u.stack);
        assert_eq!(a.decoder, u.decoder);
    }

    #[test]
    fn seeded_runs_repeat() {
        let data = make_synthetic(SyntheticKind::NoiseBit, 200, 5, 1).unwrap();
        let strip = |r: TrainReport| -> Vec<(f64, f64, f64)> {
            r.metrics
                .iter()
                .map(|m| {
                    (
                        m.reconstruction_mse,
                        m.adversary_cross_entropy,
                        m.batch_mean_dampening,
                    )
                })
                .collect()
        };
        let a = strip(train_alfr(&data, &small_config(1.0)).unwrap());
        let b = strip(train_alfr(&data, &small_config(1.0)).unwrap());
        assert_eq!(a, b);
        assert_eq!(a.len(), 3);
    }

    #[test]
    fn per_epoch_interleave_runs() {
        let data = make_synthetic(SyntheticKind::LeakyFeature, 100, 4, 1).unwrap();
        let cfg = AlfrConfig {
            interleave: Interleave::PerEpoch,
            ..small_config(1.0)
        };
        let r = train_alfr(&data, &cfg).unwrap();
        assert_eq!(r.metrics.len(), 3);
        // epoch 1 only trains the adversary, so the actor loss cannot have moved
        // until epoch 2 starts updating it.
        assert!(r.metrics.iter().all(|m| m.reconstruction_mse.is_finite()));
    }

    #[test]
    fn rejects_bad_config() {
        let data = make_synthetic(SyntheticKind::NoiseBit, 20, 3, 1).unwrap();
        assert!(train_alfr(
            &data,
            &AlfrConfig {
                epochs: 0,
                ..small_config(1.0)
            }
        )
        .is_err());
        assert!(train_alfr(&data, &small_config(f64::NAN)).is_err());
        assert!(train_alfr(
            &data,
            &AlfrConfig {
                batch_size: 0,
                ..small_config(1.0)
            }
        )
        .is_err());
    }

    #[test]
    fn exploding_loss_aborts() {
        let data = make_synthetic(SyntheticKind::NoiseBit, 64, 3, 1).unwrap();
        let mut cfg = small_config(1.0);
        cfg.actor_optimizer.learning_rate = 1e300;
        let err = train_alfr(&data, &cfg).unwrap_err();
        assert!(matches!(err, Error::NonFinite { .. }), "{err}");
    }
}
