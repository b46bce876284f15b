//! Trainer invariants on small synthetic data. Each check returns a short
//! description of what held, or what broke.

use std::fs;
use std::path::Path;

use censor_core::data::{make_synthetic, LabeledDataset, SyntheticKind};
use censor_core::experiment::{run_experiment_with, ExperimentConfig, METRICS_FILE};
use censor_core::par::Execution;
use censor_core::training::{
    train_alfr_ds, train_uncensored, AlfrConfig, AlfrDsConfig, AlfrDsTrainer, Architecture,
    DampeningMode,
};

pub fn architecture() -> Architecture {
    Architecture {
        latent_dim: 4,
        decoder_hidden: vec![8],
        adversary_hidden: vec![8],
        ..Architecture::default()
    }
}

pub fn ds_config(stacks: usize, epochs: usize, seed: u64) -> AlfrDsConfig {
    AlfrDsConfig {
        max_stacks: stacks,
        epochs_per_stack: epochs,
        batch_size: 32,
        architecture: architecture(),
        adversary_finetune_epochs: 1,
        seed,
        ..AlfrDsConfig::default()
    }
}

pub fn leaky(n: usize, seed: u64) -> LabeledDataset {
    make_synthetic(SyntheticKind::LeakyFeature, n, 6, seed).unwrap()
}

fn check(ok: bool, message: impl Into<String>) -> Result<(), String> {
    if ok {
        Ok(())
    } else {
        Err(message.into())
    }
}

/// Pinned δ = 0 reproduces the plain autoencoder bit for bit, and pinned
/// δ = 1 leaves the adversary untouched.
pub fn dampening_boundaries(seeds: u64) -> Result<String, String> {
    for seed in 0..seeds {
        let d = leaky(256, seed);
        let epochs = 3;
        let mut t = AlfrDsTrainer::new(&d, &ds_config(1, epochs, seed)).unwrap();
        for _ in 0..epochs {
            t.run_epoch_with(DampeningMode::Fixed(0.0)).unwrap();
        }
        let ae = AlfrConfig {
            epochs,
            batch_size: 32,
            architecture: architecture(),
            seed,
            ..AlfrConfig::default()
        };
        let u = train_uncensored(&d, &ae).unwrap();
        let curve: Vec<f64> = t.metrics().iter().map(|m| m.reconstruction_mse).collect();
        check(
            curve == u.reconstruction_curve(),
            format!("seed {seed}: δ=0 loss curve differs"),
        )?;
        check(
            t.stack().encoders()[0].layers() == u.stack.encoders()[0].layers()
                && t.decoder() == &u.decoder,
            format!("seed {seed}: δ=0 parameters differ from the autoencoder"),
        )?;

        let mut t = AlfrDsTrainer::new(&d, &ds_config(1, 1, seed)).unwrap();
        t.run_epoch().unwrap();
        let before = t.adversary().clone();
        let encoder_before = t.stack().encoders()[0].clone();
        for _ in 0..2 {
            t.run_epoch_with(DampeningMode::Fixed(1.0)).unwrap();
        }
        check(
            t.adversary() == &before,
            format!("seed {seed}: δ=1 moved the adversary"),
        )?;
        check(
            t.stack().encoders()[0] != encoder_before,
            format!("seed {seed}: δ=1 also froze the actor"),
        )?;
    }
    Ok(format!(
        "{seeds} seeds, δ=0 trajectory and δ=1 adversary bit-identical"
    ))
}

/// Snapshots every frozen encoder as it is frozen and compares with the
/// final stack.
pub fn freeze_invariance(stacks: usize) -> Result<String, String> {
    let d = leaky(256, 1);
    let cfg = ds_config(stacks, 2, 5);
    let mut t = AlfrDsTrainer::new(&d, &cfg).unwrap();
    let mut frozen = Vec::new();
    for k in 0..stacks {
        for _ in 0..cfg.epochs_per_stack {
            t.run_epoch().unwrap();
        }
        t.finish_stack().unwrap();
        frozen.push(t.stack().encoders()[k].clone());
        if k + 1 < stacks {
            t.push_encoder().unwrap();
        }
        for (j, snap) in frozen.iter().enumerate() {
            check(
                t.stack().encoders()[j].layers() == snap.layers(),
                format!("encoder {j} changed after stack {k}"),
            )?;
        }
    }
    let report = t.into_report(censor_core::training::TerminatedBy::Deadline);
    for (j, snap) in frozen.iter().enumerate() {
        check(
            report.stack.encoders()[j].layers() == snap.layers(),
            format!("encoder {j} changed by run end"),
        )?;
    }
    Ok(format!(
        "{stacks} stacks, every frozen encoder bit-identical at run end"
    ))
}

pub const SYNTHETIC_RUN: &str = r#"
seed = 7
output_dir = "unused"
[dataset]
source = "synthetic"
kind = "leaky_feature"
rows = 400
dim = 6
[method]
kind = "alfr_ds"
max_stacks = 2
epochs_per_stack = 3
[architecture]
latent_dim = 4
decoder_hidden = [8]
adversary_hidden = [8]
[optimizer]
batch_size = 32
[eval]
repeats = 2
"#;

/// The same config run three times, including once sequentially, yields a
/// byte-identical metrics stream.
pub fn determinism(root: &Path) -> Result<String, String> {
    let mut streams = Vec::new();
    for (i, exec) in [
        Execution::Parallel,
        Execution::Parallel,
        Execution::Sequential,
    ]
    .into_iter()
    .enumerate()
    {
        let mut cfg = ExperimentConfig::from_toml(SYNTHETIC_RUN).map_err(|e| e.to_string())?;
        cfg.output_dir = root.join(format!("run{i}"));
        run_experiment_with(exec, &cfg).map_err(|e| e.to_string())?;
        streams.push(fs::read(cfg.output_dir.join(METRICS_FILE)).map_err(|e| e.to_string())?);
    }
    check(!streams[0].is_empty(), "empty metrics stream")?;
    check(
        streams.iter().all(|s| *s == streams[0]),
        "metrics streams differ between runs",
    )?;
    Ok(format!("3 runs, {} identical bytes each", streams[0].len()))
}

/// Full-set adversary accuracy never rises by more than 0.02 from one
/// stack to the next. Needs enough rows and epochs per stack for the
/// fine-tuned adversary score to settle.
pub fn stacking_monotone(seed: u64) -> Result<String, String> {
    let d = make_synthetic(SyntheticKind::LeakyFeature, 4000, 8, seed).unwrap();
    let cfg = AlfrDsConfig {
        max_stacks: 4,
        epochs_per_stack: 10,
        architecture: Architecture {
            latent_dim: 8,
            decoder_hidden: vec![16],
            adversary_hidden: vec![16],
            ..Architecture::default()
        },
        seed,
        ..AlfrDsConfig::default()
    };
    let r = train_alfr_ds(&d, &cfg).unwrap();
    let accs: Vec<f64> = r.stacks.iter().map(|s| s.adversary_accuracy).collect();
    for w in accs.windows(2) {
        check(
            w[1] <= w[0] + 0.02,
            format!("adversary accuracy rose: {accs:?}"),
        )?;
    }
    Ok(format!("{accs:?}"))
}
