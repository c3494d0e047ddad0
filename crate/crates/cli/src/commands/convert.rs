use std::path::Path;

use anyhow::{Context, Result};
use lcs_core::io::{write_container, Dtype, StoredWeights};
use lcs_core::quantize::quantize_model;
use lcs_core::reparam::reparameterize_model;
use lcs_core::LcsError;

use crate::Engine;

#[derive(Debug)]
pub struct ConvertOutcome {
    pub params: usize,
    pub dtype: Dtype,
    pub bytes: usize,
}

/// Merges the RRRBs of a full FP32 container, optionally quantizing the
/// result to INT8.
pub fn run(input: &Path, output: &Path, quantize: bool) -> Result<ConvertOutcome> {
    let engine = Engine::load(input)?;
    let StoredWeights::Fp32(weights) = &engine.weights else {
        return Err(LcsError::Config(
            "input container is INT8; conversion needs FP32 weights".into(),
        )
        .into());
    };
    let (cfg, merged) = reparameterize_model(weights, &engine.config)
        .with_context(|| format!("reparameterizing {}", input.display()))?;
    let stored = if quantize {
        StoredWeights::Int8(quantize_model(&merged)?)
    } else {
        StoredWeights::Fp32(merged)
    };
    let bytes = write_container(&cfg, &stored)?;
    std::fs::write(output, &bytes).with_context(|| format!("writing {}", output.display()))?;
    Ok(ConvertOutcome {
        params: stored.param_count(),
        dtype: stored.dtype(),
        bytes: bytes.len(),
    })
}
