use std::path::Path;
use std::time::Instant;

use anyhow::Result;
use lcs_core::model::count_macs;
use lcs_core::{synth, LcsError};

use crate::Engine;

#[derive(Debug)]
pub struct BenchOutcome {
    pub params: usize,
    pub macs: u64,
    pub runs_ms: Vec<f64>,
}

impl BenchOutcome {
    pub fn mean_ms(&self) -> f64 {
        self.runs_ms.iter().sum::<f64>() / self.runs_ms.len() as f64
    }

    /// Sample standard deviation (0 for a single run).
    pub fn std_ms(&self) -> f64 {
        let n = self.runs_ms.len();
        if n < 2 {
            return 0.0;
        }
        let m = self.mean_ms();
        (self.runs_ms.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / (n - 1) as f64).sqrt()
    }
}

/// Parameter and MAC counts plus forward latency on a synthetic
/// `height x width` frame. Image decoding is not timed.
pub fn run(
    weights: &Path,
    height: usize,
    width: usize,
    iters: usize,
    warmup: usize,
) -> Result<BenchOutcome> {
    if iters == 0 || height == 0 || width == 0 {
        return Err(LcsError::Config("height, width and iters must be positive".into()).into());
    }
    let engine = Engine::load(weights)?;
    let macs = count_macs(&engine.config, height, width);
    let lr = synth::scene(height, width, 0);
    for _ in 0..warmup {
        engine.upscale(&lr)?;
    }
    let mut runs_ms = Vec::with_capacity(iters);
    for _ in 0..iters {
        let t = Instant::now();
        let out = engine.upscale(&lr)?;
        runs_ms.push(t.elapsed().as_secs_f64() * 1e3);
        drop(out);
    }
    Ok(BenchOutcome {
        params: engine.param_count(),
        macs,
        runs_ms,
    })
}
