//! Precomputed embedding tables.
//!
//! * CSV: comma-separated, first column is the 0/1 label, remaining columns
//!   are features. A header row is optional and detected by a non-numeric
//!   first cell.
//! * Raw: little-endian `f32` values, row-major, with a sidecar text file
//!   (`<path>.labels`) holding one 0/1 label per line. The row width is the
//!   value count divided by the label count.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use ndarray::{Array1, Array2};
use serde::{Deserialize, Serialize};

use super::LabeledDataset;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TableFormat {
    CsvWithLabelColumn,
    RawF32leWithSidecarLabels,
}

impl TableFormat {
    /// `.csv` files are CSV; anything else is a raw table.
    pub fn from_path(path: &Path) -> Self {
        match path.extension().and_then(|e| e.to_str()) {
            Some(ext) if ext.eq_ignore_ascii_case("csv") => TableFormat::CsvWithLabelColumn,
            _ => TableFormat::RawF32leWithSidecarLabels,
        }
    }
}

pub fn sidecar_path(path: &Path) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(".labels");
    PathBuf::from(s)
}

fn parse_label(cell: &str, path: &Path, row: usize) -> Result<f64> {
    match cell.trim() {
        "0" | "0.0" => Ok(0.0),
        "1" | "1.0" => Ok(1.0),
        other => Err(Error::format(
            path,
            format!("row {row}: label {other:?} is not 0 or 1"),
        )),
    }
}

fn dataset_name(path: &Path) -> String {
    path.file_stem()
        .and_then(|s| s.to_str())
        .unwrap_or("table")
        .to_string()
}

fn load_csv(path: &Path) -> Result<LabeledDataset> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .from_path(path)
        .map_err(|e| Error::format(path, e.to_string()))?;
    let mut values = Vec::new();
    let mut labels = Vec::new();
    let mut width = None;
    for (row, record) in reader.records().enumerate() {
        let record = record.map_err(|e| Error::format(path, format!("row {row}: {e}")))?;
        let first = record.get(0).unwrap_or("").trim();
        if row == 0 && first.parse::<f64>().is_err() {
            continue;
        }
        let w = record.len().saturating_sub(1);
        if w == 0 {
            return Err(Error::format(
                path,
                format!("row {row}: no feature columns"),
            ));
        }
        match width {
            None => width = Some(w),
            Some(expected) if expected != w => {
                return Err(Error::format(
                    path,
                    format!("row {row}: {w} features, expected {expected}"),
                ));
            }
            _ => {}
        }
        labels.push(parse_label(first, path, row)?);
        for cell in record.iter().skip(1) {
            let v: f64 = cell
                .trim()
                .parse()
                .map_err(|_| Error::format(path, format!("row {row}: {cell:?} is not a number")))?;
            if !v.is_finite() {
                return Err(Error::format(path, format!("row {row}: non-finite value")));
            }
            values.push(v);
        }
    }
    let width = width.ok_or_else(|| Error::format(path, "no data rows"))?;
    let features = Array2::from_shape_vec((labels.len(), width), values).expect("rows validated");
    LabeledDataset::new(dataset_name(path), features, Array1::from(labels))
}

fn load_raw(path: &Path) -> Result<LabeledDataset> {
    let side = sidecar_path(path);
    let text = fs::read_to_string(&side).map_err(|e| Error::io(&side, e))?;
    let labels = text
        .lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(row, l)| parse_label(l, &side, row))
        .collect::<Result<Vec<f64>>>()?;
    if labels.is_empty() {
        return Err(Error::format(&side, "no labels"));
    }
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    if bytes.len() % 4 != 0 {
        return Err(Error::format(
            path,
            format!("{} bytes is not a whole number of f32 values", bytes.len()),
        ));
    }
    let count = bytes.len() / 4;
    if count == 0 || count % labels.len() != 0 {
        return Err(Error::format(
            path,
            format!(
                "{count} values do not divide into {} labelled rows",
                labels.len()
            ),
        ));
    }
    let width = count / labels.len();
    let mut values = Vec::with_capacity(count);
    for (i, c) in bytes.chunks_exact(4).enumerate() {
        let v = f32::from_le_bytes(c.try_into().unwrap());
        if !v.is_finite() {
            return Err(Error::format(
                path,
                format!("row {}: non-finite value", i / width),
            ));
        }
        values.push(f64::from(v));
    }
    let features =
        Array2::from_shape_vec((labels.len(), width), values).expect("width divides count");
    LabeledDataset::new(dataset_name(path), features, Array1::from(labels))
}

pub fn load_embedding_table(path: &Path, format: TableFormat) -> Result<LabeledDataset> {
    match format {
        TableFormat::CsvWithLabelColumn => load_csv(path),
        TableFormat::RawF32leWithSidecarLabels => load_raw(path),
    }
}

/// Writes `dataset` in `format`. Raw tables narrow features to `f32`.
pub fn write_embedding_table(
    path: &Path,
    format: TableFormat,
    dataset: &LabeledDataset,
) -> Result<()> {
    match format {
        TableFormat::CsvWithLabelColumn => {
            let mut out = String::new();
            for (row, &s) in dataset
                .features()
                .rows()
                .into_iter()
                .zip(dataset.protected())
            {
                out.push_str(if s == 1.0 { "1" } else { "0" });
                for v in row {
                    out.push(',');
                    out.push_str(&v.to_string());
                }
                out.push('\n');
            }
            fs::write(path, out).map_err(|e| Error::io(path, e))
        }
        TableFormat::RawF32leWithSidecarLabels => {
            let mut bytes = Vec::with_capacity(dataset.len() * dataset.dim() * 4);
            for v in dataset.features().iter() {
                bytes.extend_from_slice(&(*v as f32).to_le_bytes());
            }
            fs::write(path, bytes).map_err(|e| Error::io(path, e))?;
            let side = sidecar_path(path);
            let mut f = fs::File::create(&side).map_err(|e| Error::io(&side, e))?;
            for &s in dataset.protected() {
                writeln!(f, "{}", if s == 1.0 { 1 } else { 0 }).map_err(|e| Error::io(&side, e))?;
            }
            Ok(())
        }
    }
}
