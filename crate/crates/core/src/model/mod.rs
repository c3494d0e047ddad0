//! The LCS generator: configuration, canonical layer layout, weights,
//! forward pass and cost accounting.

mod cost;
mod forward;
mod layout;
mod weights;

pub use cost::{count_macs, count_params};
pub use forward::{esa_forward, forward, rrfb_forward, rrrb_forward, BlockLayers, EsaLayers};
pub use layout::{canonical_layers, LayerRole, LayerSpec, Resolution};
pub use weights::{ModelWeights, WeightSource};

use crate::error::{LcsError, Result};

/// Whether residual reparameterization blocks are stored as their
/// training-time conv triples or as merged 3x3 convolutions.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Mode {
    Full,
    Reparam,
}

/// Architecture hyperparameters.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct ModelConfig {
    pub num_blocks: usize,
    pub channels: usize,
    pub expansion: usize,
    pub rrrb_per_block: usize,
    pub esa_channels: usize,
    pub scale: usize,
    pub mode: Mode,
}

impl Default for ModelConfig {
    /// Four blocks of 38 channels, expansion 2, three RRRBs per block,
    /// 16 ESA channels, x2 upscaling, unmerged.
    fn default() -> Self {
        Self {
            num_blocks: 4,
            channels: 38,
            expansion: 2,
            rrrb_per_block: 3,
            esa_channels: 16,
            scale: 2,
            mode: Mode::Full,
        }
    }
}

impl ModelConfig {
    pub fn with_mode(self, mode: Mode) -> Self {
        Self { mode, ..self }
    }

    /// Width of the expanded feature space inside an RRRB.
    pub fn expanded(&self) -> usize {
        self.channels * self.expansion
    }

    pub fn validate(&self) -> Result<()> {
        let fields = [
            ("num_blocks", self.num_blocks),
            ("channels", self.channels),
            ("expansion", self.expansion),
            ("rrrb_per_block", self.rrrb_per_block),
            ("esa_channels", self.esa_channels),
            ("scale", self.scale),
        ];
        for (name, v) in fields {
            if v == 0 {
                return Err(LcsError::config(format!("{name} must be at least 1")));
            }
        }
        Ok(())
    }
}
