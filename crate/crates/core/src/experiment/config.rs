use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::data::{
    load_embedding_table, load_mnist_idx, make_synthetic, split, LabeledDataset, SplitSpec,
    SyntheticKind, TableFormat,
};
use crate::error::{Error, Result};
use crate::eval::ProbeSpec;
use crate::fairness::HypothesisConstraint;
use crate::optim::AdamConfig;
use crate::rng::derive_seed;
use crate::training::{AlfrConfig, AlfrDsConfig, Architecture, Interleave, ReconstructionLoss};

/// Overrides the directory that relative `output_dir` values resolve against.
pub const OUTPUT_ROOT_ENV: &str = "CENSOR_OUTPUT_ROOT";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SourceKind {
    Mnist,
    Table,
    Synthetic,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DatasetConfig {
    pub source: SourceKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub images: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub labels: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub protected_digit: Option<u8>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub path: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub format: Option<TableFormat>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub kind: Option<SyntheticKind>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rows: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dim: Option<usize>,
    /// Keep a seeded subsample of this many rows before splitting.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_rows: Option<usize>,
    #[serde(default = "default_train_fraction")]
    pub train_fraction: f64,
}

fn default_train_fraction() -> f64 {
    0.8
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MethodKind {
    Uncensored,
    Alfr,
    AlfrDs,
}

impl std::fmt::Display for MethodKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            MethodKind::Uncensored => "uncensored",
            MethodKind::Alfr => "alfr",
            MethodKind::AlfrDs => "alfr_ds",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MethodConfig {
    pub kind: MethodKind,
    /// Adversary weight for `alfr`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub alpha: Option<f64>,
    /// Epoch count for `uncensored` and `alfr`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub epochs: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub interleave: Option<Interleave>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_stacks: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub epochs_per_stack: Option<usize>,
    /// Adversary-accuracy threshold `T`; `alfr_ds` only.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub threshold: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub adversary_finetune_epochs: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reinit_adversary_per_stack: Option<bool>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reconstruction_loss: Option<ReconstructionLoss>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OptimizerConfig {
    pub batch_size: usize,
    pub actor: AdamConfig,
    pub adversary: AdamConfig,
}

impl Default for OptimizerConfig {
    fn default() -> Self {
        Self {
            batch_size: 128,
            actor: AdamConfig::default(),
            adversary: AdamConfig::default(),
        }
    }
}

/// Which rows the probes learn from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProbeData {
    /// Fit on the training slice, score on the evaluation slice.
    #[default]
    TrainSlice,
    /// Fit and score on disjoint parts of the evaluation slice only.
    EvalHoldout,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvalConfig {
    pub repeats: usize,
    pub probe_data: ProbeData,
    pub probes: Vec<ProbeSpec>,
}

impl Default for EvalConfig {
    fn default() -> Self {
        Self {
            repeats: 10,
            probe_data: ProbeData::TrainSlice,
            probes: vec![ProbeSpec::linear(0), ProbeSpec::mlp(0)],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
    #[serde(default)]
    pub seed: u64,
    pub output_dir: PathBuf,
    pub dataset: DatasetConfig,
    pub method: MethodConfig,
    #[serde(default)]
    pub architecture: Architecture,
    #[serde(default)]
    pub optimizer: OptimizerConfig,
    #[serde(default)]
    pub eval: EvalConfig,
}

/// The trainer configuration a method section resolves to.
#[derive(Debug, Clone, PartialEq)]
pub enum Method {
    Uncensored(AlfrConfig),
    Alfr(AlfrConfig),
    AlfrDs(AlfrDsConfig),
}

impl Method {
    pub fn constraint(&self) -> Option<&HypothesisConstraint> {
        match self {
            Method::AlfrDs(c) => c.constraint.as_ref(),
            _ => None,
        }
    }
}

fn field(name: &str, message: impl std::fmt::Display) -> Error {
    Error::Config(format!("{name}: {message}"))
}

fn require<T: Clone>(value: &Option<T>, name: &str, context: &str) -> Result<T> {
    value
        .clone()
        .ok_or_else(|| field(name, format!("required when {context}")))
}

fn forbid<T>(value: &Option<T>, name: &str, context: &str) -> Result<()> {
    match value {
        Some(_) => Err(field(name, format!("not used when {context}"))),
        None => Ok(()),
    }
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text)
            .map_err(|e| Error::Config(e.message().to_string() + &span_hint(text, e.span())))
    }

    /// Parses `path` and resolves relative paths against its directory. A
    /// relative `output_dir` resolves against `$CENSOR_OUTPUT_ROOT` when set.
    pub fn load(path: &Path) -> Result<Self> {
        let root = std::env::var_os(OUTPUT_ROOT_ENV).map(PathBuf::from);
        Self::load_with_root(path, root.as_deref())
    }

    /// Like [`Self::load`] with an explicit output root instead of the
    /// environment.
    pub fn load_with_root(path: &Path, output_root: Option<&Path>) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut cfg = Self::from_toml(&text).map_err(|e| match e {
            Error::Config(m) => Error::Config(format!("{}: {m}", path.display())),
            other => other,
        })?;
        let base = path.parent().unwrap_or(Path::new("."));
        cfg.resolve_paths(base, output_root.unwrap_or(base));
        Ok(cfg)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn resolve_paths(&mut self, base: &Path, output_root: &Path) {
        let fix = |p: &mut Option<PathBuf>| {
            if let Some(p) = p {
                if p.is_relative() {
                    *p = base.join(&*p);
                }
            }
        };
        fix(&mut self.dataset.images);
        fix(&mut self.dataset.labels);
        fix(&mut self.dataset.path);
        if self.output_dir.is_relative() {
            self.output_dir = output_root.join(&self.output_dir);
        }
    }

    pub fn run_name(&self) -> String {
        self.name.clone().unwrap_or_else(|| {
            self.output_dir
                .file_name()
                .and_then(|s| s.to_str())
                .unwrap_or("run")
                .to_string()
        })
    }

    /// Checks every section, including that referenced files exist.
    pub fn validate(&self) -> Result<()> {
        self.validate_dataset()?;
        self.method()?;
        if self.eval.repeats == 0 {
            return Err(field("eval.repeats", "must be at least 1"));
        }
        for (i, p) in self.eval.probes.iter().enumerate() {
            p.validate()
                .map_err(|e| field(&format!("eval.probes[{i}]"), e))?;
        }
        Ok(())
    }

    fn validate_dataset(&self) -> Result<()> {
        let d = &self.dataset;
        if !(d.train_fraction > 0.0 && d.train_fraction < 1.0) {
            return Err(field("dataset.train_fraction", "must be in (0, 1)"));
        }
        if d.max_rows == Some(0) {
            return Err(field("dataset.max_rows", "must be positive"));
        }
        let exists = |p: &PathBuf, name: &str| -> Result<()> {
            if p.is_file() {
                Ok(())
            } else {
                Err(field(name, format!("{} does not exist", p.display())))
            }
        };
        match d.source {
            SourceKind::Mnist => {
                let ctx = "source = \"mnist\"";
                exists(
                    &require(&d.images, "dataset.images", ctx)?,
                    "dataset.images",
                )?;
                exists(
                    &require(&d.labels, "dataset.labels", ctx)?,
                    "dataset.labels",
                )?;
                let digit = require(&d.protected_digit, "dataset.protected_digit", ctx)?;
                if digit > 9 {
                    return Err(field("dataset.protected_digit", "must be 0..=9"));
                }
                forbid(&d.path, "dataset.path", ctx)?;
                forbid(&d.kind, "dataset.kind", ctx)
            }
            SourceKind::Table => {
                let ctx = "source = \"table\"";
                exists(&require(&d.path, "dataset.path", ctx)?, "dataset.path")?;
                forbid(&d.images, "dataset.images", ctx)?;
                forbid(&d.kind, "dataset.kind", ctx)
            }
            SourceKind::Synthetic => {
                let ctx = "source = \"synthetic\"";
                require(&d.kind, "dataset.kind", ctx)?;
                if require(&d.rows, "dataset.rows", ctx)? < 2 {
                    return Err(field("dataset.rows", "must be at least 2"));
                }
                if require(&d.dim, "dataset.dim", ctx)? < 2 {
                    return Err(field("dataset.dim", "must be at least 2"));
                }
                forbid(&d.path, "dataset.path", ctx)?;
                forbid(&d.images, "dataset.images", ctx)
            }
        }
    }

    /// Resolves the method section into a trainer configuration.
    pub fn method(&self) -> Result<Method> {
        let m = &self.method;
        let base = AlfrConfig {
            alpha: 0.0,
            epochs: 30,
            batch_size: self.optimizer.batch_size,
            architecture: self.architecture.clone(),
            actor_optimizer: self.optimizer.actor,
            adversary_optimizer: self.optimizer.adversary,
            interleave: m.interleave.unwrap_or_default(),
            reconstruction_loss: m.reconstruction_loss.unwrap_or_default(),
            seed: self.seed,
        };
        let prefix = |e: Error| match e {
            Error::Config(msg) => Error::Config(format!("method: {msg}")),
            other => other,
        };
        let method = match m.kind {
            MethodKind::Uncensored | MethodKind::Alfr => {
                let ctx = format!("kind = \"{}\"", m.kind);
                forbid(&m.max_stacks, "method.max_stacks", &ctx)?;
                forbid(&m.epochs_per_stack, "method.epochs_per_stack", &ctx)?;
                forbid(&m.threshold, "method.threshold", &ctx)?;
                forbid(
                    &m.adversary_finetune_epochs,
                    "method.adversary_finetune_epochs",
                    &ctx,
                )?;
                let cfg = AlfrConfig {
                    epochs: m.epochs.unwrap_or(base.epochs),
                    ..base
                };
                if m.kind == MethodKind::Uncensored {
                    forbid(&m.alpha, "method.alpha", &ctx)?;
                    cfg.validate().map_err(prefix)?;
                    Method::Uncensored(cfg)
                } else {
                    let cfg = AlfrConfig {
                        alpha: m.alpha.unwrap_or(1.0),
                        ..cfg
                    };
                    cfg.validate().map_err(prefix)?;
                    Method::Alfr(cfg)
                }
            }
            MethodKind::AlfrDs => {
                let ctx = "kind = \"alfr_ds\"";
                forbid(&m.alpha, "method.alpha", ctx)?;
                forbid(&m.epochs, "method.epochs", ctx)?;
                forbid(&m.interleave, "method.interleave", ctx)?;
                let constraint = m
                    .threshold
                    .map(HypothesisConstraint::adversary_accuracy)
                    .transpose()
                    .map_err(|e| field("method.threshold", e))?;
                let defaults = AlfrDsConfig::default();
                let cfg = AlfrDsConfig {
                    max_stacks: m.max_stacks.unwrap_or(defaults.max_stacks),
                    epochs_per_stack: m.epochs_per_stack.unwrap_or(defaults.epochs_per_stack),
                    batch_size: base.batch_size,
                    constraint,
                    architecture: base.architecture,
                    actor_optimizer: base.actor_optimizer,
                    adversary_optimizer: base.adversary_optimizer,
                    adversary_finetune_epochs: m
                        .adversary_finetune_epochs
                        .unwrap_or(defaults.adversary_finetune_epochs),
                    reinit_adversary_per_stack: m.reinit_adversary_per_stack.unwrap_or(false),
                    reconstruction_loss: base.reconstruction_loss,
                    seed: self.seed,
                };
                cfg.validate().map_err(prefix)?;
                Method::AlfrDs(cfg)
            }
        };
        Ok(method)
    }

    /// Loads the configured dataset, before subsampling and splitting.
    pub fn load_dataset(&self) -> Result<LabeledDataset> {
        self.validate_dataset()?;
        let d = &self.dataset;
        match d.source {
            SourceKind::Mnist => load_mnist_idx(
                d.images.as_deref().expect("validated"),
                d.labels.as_deref().expect("validated"),
                d.protected_digit.expect("validated"),
            ),
            SourceKind::Table => {
                let path = d.path.as_deref().expect("validated");
                load_embedding_table(
                    path,
                    d.format.unwrap_or_else(|| TableFormat::from_path(path)),
                )
            }
            SourceKind::Synthetic => make_synthetic(
                d.kind.expect("validated"),
                d.rows.expect("validated"),
                d.dim.expect("validated"),
                derive_seed(self.seed, "synthetic"),
            ),
        }
    }

    /// Training and evaluation slices.
    pub fn load_split(&self) -> Result<(LabeledDataset, LabeledDataset)> {
        let mut data = self.load_dataset()?;
        if let Some(n) = self.dataset.max_rows {
            if n < data.len() {
                data = data.subsample(n, derive_seed(self.seed, "subsample"));
            }
        }
        split(
            &data,
            SplitSpec {
                train_fraction: self.dataset.train_fraction,
                seed: derive_seed(self.seed, "split"),
            },
        )
    }
}

fn span_hint(text: &str, span: Option<std::ops::Range<usize>>) -> String {
    match span {
        Some(r) => {
            let line = text[..r.start.min(text.len())].matches('\n').count() + 1;
            format!(" (line {line})")
        }
        None => String::new(),
    }
}
