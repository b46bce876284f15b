use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::run::{load_decoder, load_stack, Manifest};
use crate::data::{load_embedding_table, write_embedding_table, TableFormat};
use crate::error::{Error, Result};
use crate::training::censor_original;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CensorSpace {
    /// `e(x)`.
    Latent,
    /// `d(e(x))`, same width as the input.
    Original,
}

impl std::str::FromStr for CensorSpace {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "latent" => Ok(CensorSpace::Latent),
            "original" => Ok(CensorSpace::Original),
            other => Err(Error::Config(format!(
                "unknown space {other:?}; expected latent or original"
            ))),
        }
    }
}

impl std::fmt::Display for CensorSpace {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            CensorSpace::Latent => "latent",
            CensorSpace::Original => "original",
        })
    }
}

/// `<stem>.<space>.<ext>` next to the input.
pub fn default_output_path(input: &Path, space: CensorSpace) -> PathBuf {
    let stem = input
        .file_stem()
        .and_then(|s| s.to_str())
        .unwrap_or("table");
    let name = match input.extension().and_then(|e| e.to_str()) {
        Some(ext) => format!("{stem}.{space}.{ext}"),
        None => format!("{stem}.{space}"),
    };
    input.with_file_name(name)
}

/// Passes every row of `input` through a trained run and writes the result
/// to `output` in the input's table format. Labels are carried over.
pub fn censor_table(
    run_dir: &Path,
    input: &Path,
    space: CensorSpace,
    output: &Path,
) -> Result<usize> {
    let manifest = Manifest::load(run_dir)?;
    let stack = load_stack(run_dir, &manifest)?;
    let format = TableFormat::from_path(input);
    let data = load_embedding_table(input, format)?;
    let features = match space {
        CensorSpace::Latent => stack.encode(data.features())?,
        CensorSpace::Original => censor_original(&stack, &load_decoder(run_dir)?, data.features())?,
    };
    let out = data.with_features(features)?;
    write_embedding_table(output, format, &out)?;
    Ok(out.len())
}
