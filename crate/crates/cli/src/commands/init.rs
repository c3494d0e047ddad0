use std::path::Path;

use anyhow::{Context, Result};
use lcs_core::io::{write_container, StoredWeights};
use lcs_core::{ModelConfig, ModelWeights};

/// Writes a full-mode FP32 container for the default configuration with
/// seeded random (or all-zero) weights.
pub fn run(output: &Path, seed: u64, zeros: bool) -> Result<usize> {
    let cfg = ModelConfig::default();
    let weights = if zeros {
        ModelWeights::zeros(&cfg)
    } else {
        ModelWeights::random(&cfg, seed)
    };
    let stored = StoredWeights::Fp32(weights);
    let bytes = write_container(&cfg, &stored)?;
    std::fs::write(output, &bytes).with_context(|| format!("writing {}", output.display()))?;
    Ok(stored.param_count())
}
