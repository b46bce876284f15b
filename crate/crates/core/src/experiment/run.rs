use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::config::{ExperimentConfig, Method, MethodKind, ProbeData};
use super::metrics::{write_eval, write_stacks, MetricsSink};
use crate::error::{Error, Result};
use crate::eval::{
    evaluate_censoring_on, evaluate_censoring_with, reconstruction_error_chunked, EvalResult,
};
use crate::nn::DenseNetwork;
use crate::par::Execution;
use crate::training::{
    train_alfr_observed, train_uncensored_observed, AlfrDsTrainer, EncoderStack, MetricsRecord,
    TerminatedBy, TrainReport,
};

/// Bumped whenever a run directory's files change shape or meaning.
pub const RUN_FORMAT_VERSION: u32 = 1;

pub const MANIFEST_FILE: &str = "manifest.toml";
pub const METRICS_FILE: &str = "metrics.tsv";
pub const TIMINGS_FILE: &str = "timings.tsv";
pub const EVAL_FILE: &str = "eval.tsv";
pub const STACKS_FILE: &str = "stacks.tsv";
pub const DECODER_FILE: &str = "decoder.cnsr";
pub const ADVERSARY_FILE: &str = "adversary.cnsr";

/// Written last; its presence marks a completed run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub format_version: u32,
    pub name: String,
    pub method: MethodKind,
    pub seed: u64,
    pub terminated_by: TerminatedBy,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub constraint_threshold: Option<f64>,
    pub constraint_met: bool,
    pub epochs_run: usize,
    pub stacks: usize,
    pub data_dim: usize,
    pub latent_dim: usize,
    pub train_rows: usize,
    pub eval_rows: usize,
    /// Reconstruction MSE on the evaluation slice.
    pub final_reconstruction_mse: f64,
    pub config: ExperimentConfig,
}

impl Manifest {
    pub fn load(run_dir: &Path) -> Result<Self> {
        let path = run_dir.join(MANIFEST_FILE);
        let text = fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
        let m: Manifest = toml::from_str(&text).map_err(|e| Error::format(&path, e.message()))?;
        if m.format_version != RUN_FORMAT_VERSION {
            return Err(Error::format(
                &path,
                format!(
                    "run format {} (expected {RUN_FORMAT_VERSION})",
                    m.format_version
                ),
            ));
        }
        Ok(m)
    }

    /// True when a constraint was configured and never satisfied.
    pub fn missed_constraint(&self) -> bool {
        self.constraint_threshold.is_some() && !self.constraint_met
    }
}

#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub run_dir: PathBuf,
    pub manifest: Manifest,
    pub eval: Vec<EvalResult>,
    pub report: TrainReport,
}

pub fn load_stack(run_dir: &Path, manifest: &Manifest) -> Result<EncoderStack> {
    EncoderStack::load(run_dir, manifest.data_dim, manifest.stacks)
}

pub fn load_decoder(run_dir: &Path) -> Result<DenseNetwork> {
    DenseNetwork::load(&run_dir.join(DECODER_FILE))
}

pub fn run_experiment(config: &ExperimentConfig) -> Result<RunOutcome> {
    run_experiment_with(Execution::default(), config)
}

/// Trains, evaluates and writes a run directory at `config.output_dir`.
pub fn run_experiment_with(exec: Execution, config: &ExperimentConfig) -> Result<RunOutcome> {
    config.validate()?;
    let method = config.method()?;
    let (train, eval) = config.load_split()?;
    let dir = config.output_dir.clone();
    fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
    let stale = dir.join(MANIFEST_FILE);
    if stale.exists() {
        fs::remove_file(&stale).map_err(|e| Error::io(&stale, e))?;
    }

    let mut sink = MetricsSink::create(&dir.join(METRICS_FILE), &dir.join(TIMINGS_FILE))?;
    let mut observe = |r: &MetricsRecord| sink.record(r);
    let report = match &method {
        Method::Uncensored(c) => train_uncensored_observed(&train, c, &mut observe)?,
        Method::Alfr(c) => train_alfr_observed(&train, c, &mut observe)?,
        Method::AlfrDs(c) => AlfrDsTrainer::new(&train, c)?.run_observed(&mut observe)?,
    };

    report.stack.save(&dir)?;
    report.decoder.save(&dir.join(DECODER_FILE))?;
    report.adversary.save(&dir.join(ADVERSARY_FILE))?;
    write_stacks(&dir.join(STACKS_FILE), &report.stacks)?;

    let (probes, repeats) = (&config.eval.probes, config.eval.repeats);
    let results = match config.eval.probe_data {
        ProbeData::TrainSlice => {
            evaluate_censoring_on(exec, &report.stack, &train, &eval, probes, repeats)?
        }
        ProbeData::EvalHoldout => {
            evaluate_censoring_with(exec, &report.stack, &eval, probes, repeats)?
        }
    };
    write_eval(&dir.join(EVAL_FILE), &results)?;
    let mse = reconstruction_error_chunked(exec, &report.stack, &report.decoder, &eval)?;

    let manifest = Manifest {
        format_version: RUN_FORMAT_VERSION,
        name: config.run_name(),
        method: config.method.kind,
        seed: config.seed,
        terminated_by: report.terminated_by,
        constraint_threshold: method.constraint().map(|c| c.threshold),
        constraint_met: report.terminated_by == TerminatedBy::ConstraintMet,
        epochs_run: report.metrics.len(),
        stacks: report.stack.len(),
        data_dim: train.dim(),
        latent_dim: report.stack.output_dim(),
        train_rows: train.len(),
        eval_rows: eval.len(),
        final_reconstruction_mse: mse,
        config: config.clone(),
    };
    let text = toml::to_string(&manifest).expect("manifest serializes");
    let tmp = dir.join(format!("{MANIFEST_FILE}.partial"));
    fs::write(&tmp, text).map_err(|e| Error::io(&tmp, e))?;
    fs::rename(&tmp, &stale).map_err(|e| Error::io(&stale, e))?;

    Ok(RunOutcome {
        run_dir: dir,
        manifest,
        eval: results,
        report,
    })
}
