//! Tab-separated record files. Every file starts with a header line naming
//! its columns; numbers use Rust's shortest round-trip formatting.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::eval::EvalResult;
use crate::training::{MetricsRecord, StackSummary};

pub const METRICS_COLUMNS: [&str; 5] = [
    "epoch",
    "stack_index",
    "reconstruction_mse",
    "adversary_cross_entropy",
    "batch_mean_dampening",
];
pub const TIMING_COLUMNS: [&str; 2] = ["epoch", "wall_time"];
pub const EVAL_COLUMNS: [&str; 4] = ["probe", "mean_accuracy", "std_accuracy", "runs"];
pub const STACK_COLUMNS: [&str; 4] = [
    "stack_index",
    "epochs",
    "adversary_accuracy",
    "constraint_met",
];

pub fn metrics_line(r: &MetricsRecord) -> String {
    format!(
        "{}\t{}\t{}\t{}\t{}",
        r.epoch,
        r.stack_index,
        r.reconstruction_mse,
        r.adversary_cross_entropy,
        r.batch_mean_dampening
    )
}

/// Appends records to a file, flushing after each line so the file is valid
/// up to the last complete record if the process dies.
pub struct TsvWriter {
    path: PathBuf,
    out: BufWriter<File>,
}

impl TsvWriter {
    pub fn create(path: &Path, columns: &[&str]) -> Result<Self> {
        let file = File::create(path).map_err(|e| Error::io(path, e))?;
        let mut w = Self {
            path: path.to_path_buf(),
            out: BufWriter::new(file),
        };
        w.line(&columns.join("\t"))?;
        Ok(w)
    }

    pub fn line(&mut self, line: &str) -> Result<()> {
        writeln!(self.out, "{line}")
            .and_then(|_| self.out.flush())
            .map_err(|e| Error::io(&self.path, e))
    }
}

/// The reproducible metrics stream plus the wall-clock side file.
pub struct MetricsSink {
    metrics: TsvWriter,
    timings: TsvWriter,
}

impl MetricsSink {
    pub fn create(metrics_path: &Path, timings_path: &Path) -> Result<Self> {
        Ok(Self {
            metrics: TsvWriter::create(metrics_path, &METRICS_COLUMNS)?,
            timings: TsvWriter::create(timings_path, &TIMING_COLUMNS)?,
        })
    }

    pub fn record(&mut self, r: &MetricsRecord) -> Result<()> {
        self.metrics.line(&metrics_line(r))?;
        self.timings
            .line(&format!("{}\t{:.3}", r.epoch, r.wall_time))
    }
}

pub fn write_eval(path: &Path, results: &[EvalResult]) -> Result<()> {
    let mut w = TsvWriter::create(path, &EVAL_COLUMNS)?;
    for r in results {
        w.line(&format!(
            "{}\t{}\t{}\t{}",
            r.probe_kind, r.mean_accuracy, r.std_accuracy, r.runs
        ))?;
    }
    Ok(())
}

pub fn write_stacks(path: &Path, stacks: &[StackSummary]) -> Result<()> {
    let mut w = TsvWriter::create(path, &STACK_COLUMNS)?;
    for s in stacks {
        w.line(&format!(
            "{}\t{}\t{}\t{}",
            s.stack_index, s.epochs, s.adversary_accuracy, s.constraint_met
        ))?;
    }
    Ok(())
}

/// Header and rows of a TSV file written by this module. Rows must have as
/// many cells as the header.
pub fn read_tsv(path: &Path) -> Result<(Vec<String>, Vec<Vec<String>>)> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut lines = text.lines();
    let header: Vec<String> = lines
        .next()
        .ok_or_else(|| Error::format(path, "missing header line"))?
        .split('\t')
        .map(str::to_string)
        .collect();
    let mut rows = Vec::new();
    for (i, l) in lines.enumerate() {
        let cells: Vec<String> = l.split('\t').map(str::to_string).collect();
        if cells.len() != header.len() {
            return Err(Error::format(
                path,
                format!(
                    "row {i}: {} cells, header has {}",
                    cells.len(),
                    header.len()
                ),
            ));
        }
        rows.push(cells);
    }
    Ok((header, rows))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::eval::ProbeKind;

    #[test]
    fn metrics_round_trip_text() {
        let dir = tempfile::tempdir().unwrap();
        let (m, t) = (dir.path().join("m.tsv"), dir.path().join("t.tsv"));
        let mut sink = MetricsSink::create(&m, &t).unwrap();
        let r = MetricsRecord {
            epoch: 1,
            stack_index: 0,
            reconstruction_mse: 0.1,
            adversary_cross_entropy: std::f64::consts::LN_2,
            batch_mean_dampening: 0.0,
            wall_time: 12.5,
        };
        sink.record(&r).unwrap();
        let (h, rows) = read_tsv(&m).unwrap();
        assert_eq!(h, METRICS_COLUMNS);
        assert_eq!(
            rows[0][3].parse::<f64>().unwrap(),
            r.adversary_cross_entropy
        );
        assert!(!std::fs::read_to_string(&m).unwrap().contains("12.5"));
    }

    #[test]
    fn eval_table() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("e.tsv");
        write_eval(
            &p,
            &[EvalResult {
                probe_kind: ProbeKind::Mlp,
                mean_accuracy: 0.9,
                std_accuracy: 0.01,
                runs: 10,
            }],
        )
        .unwrap();
        let (_, rows) = read_tsv(&p).unwrap();
        assert_eq!(rows, vec![vec!["mlp", "0.9", "0.01", "10"]]);
    }

    #[test]
    fn ragged_rows_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("e.tsv");
        std::fs::write(&p, "a\tb\n1\n").unwrap();
        assert!(read_tsv(&p).is_err());
    }
}
