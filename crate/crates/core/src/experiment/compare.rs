use std::path::{Path, PathBuf};

use super::metrics::read_tsv;
use super::run::{Manifest, EVAL_FILE};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct ProbeCell {
    pub mean: f64,
    pub std: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CompareRow {
    pub name: String,
    pub dir: PathBuf,
    pub method: String,
    pub stacks: usize,
    pub epochs: usize,
    pub terminated_by: String,
    pub final_reconstruction_mse: f64,
    pub linear: Option<ProbeCell>,
    pub mlp: Option<ProbeCell>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CompareTable {
    pub rows: Vec<CompareRow>,
}

fn incomplete(dir: &Path, why: impl std::fmt::Display) -> Error {
    Error::Config(format!(
        "run directory {} is missing or incomplete: {why}",
        dir.display()
    ))
}

fn load_row(dir: &Path) -> Result<CompareRow> {
    if !dir.is_dir() {
        return Err(incomplete(dir, "not a directory"));
    }
    let manifest = Manifest::load(dir).map_err(|e| incomplete(dir, e))?;
    let (header, rows) = read_tsv(&dir.join(EVAL_FILE)).map_err(|e| incomplete(dir, e))?;
    let col = |name: &str| header.iter().position(|h| h == name);
    let (Some(probe), Some(mean), Some(std)) =
        (col("probe"), col("mean_accuracy"), col("std_accuracy"))
    else {
        return Err(incomplete(dir, "eval table lacks probe columns"));
    };
    let mut out = CompareRow {
        name: manifest.name.clone(),
        dir: dir.to_path_buf(),
        method: manifest.method.to_string(),
        stacks: manifest.stacks,
        epochs: manifest.epochs_run,
        terminated_by: manifest.terminated_by.to_string(),
        final_reconstruction_mse: manifest.final_reconstruction_mse,
        linear: None,
        mlp: None,
    };
    for r in rows {
        let parse = |s: &str| {
            s.parse::<f64>()
                .map_err(|_| incomplete(dir, format!("bad number {s:?}")))
        };
        let cell = ProbeCell {
            mean: parse(&r[mean])?,
            std: parse(&r[std])?,
        };
        match r[probe].as_str() {
            "linear" => out.linear = Some(cell),
            "mlp" => out.mlp = Some(cell),
            _ => {}
        }
    }
    Ok(out)
}

/// Collects one row per run directory, sorted by run name then path.
pub fn compare_runs(dirs: &[PathBuf]) -> Result<CompareTable> {
    let mut rows = dirs
        .iter()
        .map(|d| load_row(d))
        .collect::<Result<Vec<_>>>()?;
    rows.sort_by(|a, b| a.name.cmp(&b.name).then_with(|| a.dir.cmp(&b.dir)));
    Ok(CompareTable { rows })
}

const HEADER: [&str; 11] = [
    "run",
    "method",
    "stacks",
    "epochs",
    "terminated_by",
    "reconstruction_mse",
    "linear_mean",
    "linear_std",
    "mlp_mean",
    "mlp_std",
    "dir",
];

impl CompareTable {
    fn cells(row: &CompareRow) -> Vec<String> {
        let probe = |c: &Option<ProbeCell>| match c {
            Some(c) => (c.mean.to_string(), c.std.to_string()),
            None => ("".into(), "".into()),
        };
        let (lm, ls) = probe(&row.linear);
        let (mm, ms) = probe(&row.mlp);
        vec![
            row.name.clone(),
            row.method.clone(),
            row.stacks.to_string(),
            row.epochs.to_string(),
            row.terminated_by.clone(),
            row.final_reconstruction_mse.to_string(),
            lm,
            ls,
            mm,
            ms,
            row.dir.display().to_string(),
        ]
    }

    pub fn to_tsv(&self) -> String {
        let mut out = HEADER.join("\t");
        out.push('\n');
        for r in &self.rows {
            out.push_str(&Self::cells(r).join("\t"));
            out.push('\n');
        }
        out
    }

    /// Human-readable rendering with `mean ± std` probe columns.
    pub fn to_text(&self) -> String {
        let pm = |c: &Option<ProbeCell>| match c {
            Some(c) => format!("{:.3} ± {:.3}", c.mean, c.std),
            None => "-".into(),
        };
        let header = ["run", "method", "stacks", "epochs", "mse", "linear", "mlp"];
        let body: Vec<Vec<String>> = self
            .rows
            .iter()
            .map(|r| {
                vec![
                    r.name.clone(),
                    r.method.clone(),
                    r.stacks.to_string(),
                    r.epochs.to_string(),
                    format!("{:.5}", r.final_reconstruction_mse),
                    pm(&r.linear),
                    pm(&r.mlp),
                ]
            })
            .collect();
        let mut widths: Vec<usize> = header.iter().map(|h| h.chars().count()).collect();
        for row in &body {
            for (w, c) in widths.iter_mut().zip(row) {
                *w = (*w).max(c.chars().count());
            }
        }
        let render = |cells: Vec<String>| -> String {
            let parts: Vec<String> = cells
                .iter()
                .zip(&widths)
                .map(|(c, &w)| format!("{c}{}", " ".repeat(w - c.chars().count())))
                .collect();
            parts.join("  ").trim_end().to_string() + "\n"
        };
        let mut out = render(header.iter().map(|s| s.to_string()).collect());
        for row in body {
            out.push_str(&render(row));
        }
        out
    }
}
