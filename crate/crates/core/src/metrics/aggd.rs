//! Asymmetric generalized Gaussian fit by moment matching.

use std::sync::OnceLock;

use statrs::function::gamma::{gamma, ln_gamma};

use crate::error::{LcsError, Result};

const ALPHA_MIN: f64 = 0.2;
const ALPHA_MAX: f64 = 10.0;
const ALPHA_STEP: f64 = 0.001;
const MIN_SAMPLES: usize = 64;

/// Shape `alpha` and the one-sided standard deviations of the negative and
/// positive samples.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AggdFit {
    pub alpha: f64,
    pub sigma_l: f64,
    pub sigma_r: f64,
}

impl AggdFit {
    fn scale_factor(&self) -> f64 {
        (gamma(1.0 / self.alpha) / gamma(3.0 / self.alpha)).sqrt()
    }

    /// Left scale parameter of the distribution.
    pub fn beta_l(&self) -> f64 {
        self.sigma_l * self.scale_factor()
    }

    /// Right scale parameter of the distribution.
    pub fn beta_r(&self) -> f64 {
        self.sigma_r * self.scale_factor()
    }

    /// Mean of the fitted distribution.
    pub fn mean(&self) -> f64 {
        (self.beta_r() - self.beta_l()) * gamma(2.0 / self.alpha) / gamma(1.0 / self.alpha)
    }
}

/// `(alpha, Gamma(2/a)^2 / (Gamma(1/a) Gamma(3/a)))` over the alpha grid.
fn ratio_table() -> &'static [(f64, f64)] {
    static TABLE: OnceLock<Vec<(f64, f64)>> = OnceLock::new();
    TABLE.get_or_init(|| {
        let steps = ((ALPHA_MAX - ALPHA_MIN) / ALPHA_STEP).round() as usize;
        (0..=steps)
            .map(|i| {
                let a = ALPHA_MIN + i as f64 * ALPHA_STEP;
                let r = (2.0 * ln_gamma(2.0 / a) - ln_gamma(1.0 / a) - ln_gamma(3.0 / a)).exp();
                (a, r)
            })
            .collect()
    })
}

/// Sum of ascending-sorted values, so the result depends only on the
/// multiset of inputs.
fn sorted_sum(mut v: Vec<f64>) -> f64 {
    v.sort_by(f64::total_cmp);
    v.iter().sum()
}

pub fn fit_aggd(samples: &[f64]) -> Result<AggdFit> {
    if samples.len() < MIN_SAMPLES {
        return Err(LcsError::data(format!(
            "AGGD fit needs at least {MIN_SAMPLES} samples, got {}",
            samples.len()
        )));
    }
    if samples.iter().any(|s| !s.is_finite()) {
        return Err(LcsError::data("non-finite AGGD sample"));
    }
    if samples.iter().all(|&s| s == samples[0]) {
        return Err(LcsError::data("all AGGD samples identical"));
    }
    let left: Vec<f64> = samples
        .iter()
        .filter(|&&s| s < 0.0)
        .map(|s| s * s)
        .collect();
    let right: Vec<f64> = samples
        .iter()
        .filter(|&&s| s > 0.0)
        .map(|s| s * s)
        .collect();
    if left.is_empty() || right.is_empty() {
        return Err(LcsError::data("AGGD samples lie on one side of zero"));
    }
    let (n_l, n_r) = (left.len() as f64, right.len() as f64);
    let (sq_l, sq_r) = (sorted_sum(left), sorted_sum(right));
    let sigma_l = (sq_l / n_l).sqrt();
    let sigma_r = (sq_r / n_r).sqrt();
    let n = samples.len() as f64;
    let mean_abs = sorted_sum(samples.iter().map(|s| s.abs()).collect()) / n;
    let mean_sq = (sq_l + sq_r) / n;
    let g = sigma_l / sigma_r;
    let r_hat = mean_abs * mean_abs / mean_sq;
    let r_norm = r_hat * (g.powi(3) + 1.0) * (g + 1.0) / (g * g + 1.0).powi(2);
    let mut best = (f64::INFINITY, ALPHA_MIN);
    for &(a, r) in ratio_table() {
        let d = (r - r_norm) * (r - r_norm);
        if d < best.0 {
            best = (d, a);
        }
    }
    Ok(AggdFit {
        alpha: best.1,
        sigma_l,
        sigma_r,
    })
}
