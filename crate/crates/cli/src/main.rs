use std::path::{Path, PathBuf};
use std::process::ExitCode;

use censor_core::experiment::{
    censor_table, compare_runs, default_output_path, run_experiment, CensorSpace, ExperimentConfig,
    OUTPUT_ROOT_ENV,
};
use censor_core::Error;
use clap::{Parser, Subcommand, ValueEnum};

const EXIT_FAILURE: u8 = 1;
const EXIT_CONFIG: u8 = 2;
const EXIT_NUMERIC: u8 = 3;
const EXIT_DEADLINE: u8 = 4;

#[derive(Parser)]
#[command(
    name = "censor",
    version,
    about = "Train and evaluate censored representations"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train, evaluate and write a run directory.
    Run {
        config: PathBuf,
        /// Directory that a relative `output_dir` resolves against; defaults
        /// to the config file's directory.
        #[arg(long, env = OUTPUT_ROOT_ENV)]
        output_root: Option<PathBuf>,
    },
    /// Tabulate finished runs.
    Compare {
        #[arg(required = true)]
        run_dirs: Vec<PathBuf>,
        /// Print tab-separated values instead of the aligned table.
        #[arg(long)]
        tsv: bool,
    },
    /// Push an embedding table through a trained run.
    Censor {
        run_dir: PathBuf,
        table: PathBuf,
        #[arg(long, value_enum)]
        space: Space,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Parse and check a config without training.
    Validate {
        config: PathBuf,
        #[arg(long, env = OUTPUT_ROOT_ENV)]
        output_root: Option<PathBuf>,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum Space {
    Latent,
    Original,
}

impl From<Space> for CensorSpace {
    fn from(s: Space) -> Self {
        match s {
            Space::Latent => CensorSpace::Latent,
            Space::Original => CensorSpace::Original,
        }
    }
}

fn fail(code: u8, err: &Error) -> ExitCode {
    eprintln!("error: {err}");
    ExitCode::from(code)
}

fn error_code(err: &Error) -> u8 {
    match err {
        Error::Config(_) => EXIT_CONFIG,
        Error::NonFinite { .. } => EXIT_NUMERIC,
        _ => EXIT_FAILURE,
    }
}

fn load_config(path: &Path, output_root: Option<&Path>) -> Result<ExperimentConfig, Error> {
    let cfg = ExperimentConfig::load_with_root(path, output_root)?;
    cfg.validate()?;
    Ok(cfg)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match cli.command {
        Command::Validate {
            config,
            output_root,
        } => match load_config(&config, output_root.as_deref()) {
            Ok(cfg) => {
                println!(
                    "{}: ok ({} -> {})",
                    config.display(),
                    cfg.method.kind,
                    cfg.output_dir.display()
                );
                ExitCode::SUCCESS
            }
            Err(e) => fail(EXIT_CONFIG, &e),
        },
        Command::Run {
            config,
            output_root,
        } => {
            let cfg = match load_config(&config, output_root.as_deref()) {
                Ok(c) => c,
                Err(e) => return fail(EXIT_CONFIG, &e),
            };
            match run_experiment(&cfg) {
                Ok(out) => {
                    let m = &out.manifest;
                    println!(
                        "{}: {} epochs, {} stack(s), terminated by {}, reconstruction mse {:.6}",
                        out.run_dir.display(),
                        m.epochs_run,
                        m.stacks,
                        m.terminated_by,
                        m.final_reconstruction_mse
                    );
                    for r in &out.eval {
                        println!(
                            "  {} probe: {:.4} ± {:.4} over {} runs",
                            r.probe_kind, r.mean_accuracy, r.std_accuracy, r.runs
                        );
                    }
                    if m.missed_constraint() {
                        eprintln!("constraint not met within {} stack(s)", m.stacks);
                        ExitCode::from(EXIT_DEADLINE)
                    } else {
                        ExitCode::SUCCESS
                    }
                }
                Err(e) => fail(error_code(&e), &e),
            }
        }
        Command::Compare { run_dirs, tsv } => match compare_runs(&run_dirs) {
            Ok(t) => {
                print!("{}", if tsv { t.to_tsv() } else { t.to_text() });
                ExitCode::SUCCESS
            }
            Err(e) => fail(EXIT_FAILURE, &e),
        },
        Command::Censor {
            run_dir,
            table,
            space,
            out,
        } => {
            let space = CensorSpace::from(space);
            let out = out.unwrap_or_else(|| default_output_path(&table, space));
            match censor_table(&run_dir, &table, space, &out) {
                Ok(n) => {
                    println!("wrote {n} rows to {}", out.display());
                    ExitCode::SUCCESS
                }
                Err(e) => fail(error_code(&e), &e),
            }
        }
    }
}
