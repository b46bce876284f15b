//! Config-driven runs: load data, train, probe, and write a run directory.
//!
//! A run directory holds `metrics.tsv` (one line per epoch), `timings.tsv`,
//! `stacks.tsv`, `eval.tsv`, the serialized networks and `manifest.toml`.
//! The manifest is written last.

mod censor;
mod compare;
mod config;
mod metrics;
mod run;

pub use censor::{censor_table, default_output_path, CensorSpace};
pub use compare::{compare_runs, CompareRow, CompareTable, ProbeCell};
pub use config::{
    DatasetConfig, EvalConfig, ExperimentConfig, Method, MethodConfig, MethodKind, OptimizerConfig,
    ProbeData, SourceKind, OUTPUT_ROOT_ENV,
};
pub use metrics::{
    metrics_line, read_tsv, MetricsSink, TsvWriter, EVAL_COLUMNS, METRICS_COLUMNS, TIMING_COLUMNS,
};
pub use run::{
    load_decoder, load_stack, run_experiment, run_experiment_with, Manifest, RunOutcome,
    ADVERSARY_FILE, DECODER_FILE, EVAL_FILE, MANIFEST_FILE, METRICS_FILE, RUN_FORMAT_VERSION,
    STACKS_FILE, TIMINGS_FILE,
};
