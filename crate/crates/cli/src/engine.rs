use std::path::Path;

use anyhow::{Context, Result};
use lcs_core::io::{read_container, Dtype, StoredWeights};
use lcs_core::model::forward;
use lcs_core::{ModelConfig, Tensor};

/// A loaded weight container ready to run.
pub struct Engine {
    pub config: ModelConfig,
    pub weights: StoredWeights,
}

impl Engine {
    pub fn load(path: &Path) -> Result<Self> {
        let bytes = std::fs::read(path).with_context(|| format!("reading {}", path.display()))?;
        let (config, weights) =
            read_container(&bytes).with_context(|| format!("loading {}", path.display()))?;
        Ok(Self { config, weights })
    }

    pub fn dtype(&self) -> Dtype {
        self.weights.dtype()
    }

    pub fn param_count(&self) -> usize {
        self.weights.param_count()
    }

    /// Forward pass; INT8 containers run with FP32 activations.
    pub fn upscale(&self, lr: &Tensor<f32>) -> Result<Tensor<f32>> {
        let out = match &self.weights {
            StoredWeights::Fp32(w) => forward(&self.config, w, lr)?,
            StoredWeights::Int8(q) => forward(&self.config, q, lr)?,
        };
        Ok(out)
    }
}
