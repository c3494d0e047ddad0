use std::path::Path;

use anyhow::{Context, Result};
use lcs_core::io::{read_png, write_niqe_model};
use lcs_core::metrics::{fit_niqe_model, NiqeModel};

use crate::list_pngs;

/// Fits a pristine NIQE model on every PNG in `corpus_dir`.
pub fn run(corpus_dir: &Path, output: &Path, patch_size: usize) -> Result<(NiqeModel, usize)> {
    let files = list_pngs(corpus_dir)?;
    let images = files
        .iter()
        .map(|p| read_png(p).with_context(|| format!("reading {}", p.display())))
        .collect::<Result<Vec<_>>>()?;
    let model = fit_niqe_model(&images, patch_size)
        .with_context(|| format!("fitting on {}", corpus_dir.display()))?;
    std::fs::write(output, write_niqe_model(&model))
        .with_context(|| format!("writing {}", output.display()))?;
    Ok((model, images.len()))
}
