use crate::error::{LcsError, Result};

/// Mean and the central `level` percentile interval of a set of scores.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CiSummary {
    pub mean: f64,
    pub lo: f64,
    pub hi: f64,
    pub level: f64,
}

/// Arithmetic mean plus the empirical `(1 - level) / 2` and
/// `1 - (1 - level) / 2` quantiles, linearly interpolated on the sorted
/// scores (position `q * (n - 1)`).
pub fn aggregate_ci(scores: &[f64], level: f64) -> Result<CiSummary> {
    if scores.is_empty() {
        return Err(LcsError::data("no scores to aggregate"));
    }
    if !(level > 0.0 && level < 1.0) {
        return Err(LcsError::data(format!(
            "confidence level {level} outside (0, 1)"
        )));
    }
    if scores.iter().any(|s| !s.is_finite()) {
        return Err(LcsError::data("non-finite score"));
    }
    let mut sorted = scores.to_vec();
    sorted.sort_by(f64::total_cmp);
    let quantile = |q: f64| {
        let pos = q * (sorted.len() - 1) as f64;
        let lo = pos.floor() as usize;
        let hi = (lo + 1).min(sorted.len() - 1);
        let frac = pos - lo as f64;
        sorted[lo] + (sorted[hi] - sorted[lo]) * frac
    };
    let tail = (1.0 - level) / 2.0;
    // Summing the sorted values keeps the mean independent of input order.
    let mean = sorted.iter().sum::<f64>() / sorted.len() as f64;
    let (lo, hi) = (quantile(tail), quantile(1.0 - tail));
    Ok(CiSummary {
        mean,
        lo: lo.min(mean),
        hi: hi.max(mean),
        level,
    })
}

/// Per-image scores of one metric with their aggregate.
#[derive(Clone, Debug, PartialEq)]
pub struct MetricReport {
    pub metric: String,
    pub per_image: Vec<(String, f64)>,
    pub mean: f64,
    pub lo: f64,
    pub hi: f64,
    pub level: f64,
}

impl MetricReport {
    pub fn new(
        metric: impl Into<String>,
        per_image: Vec<(String, f64)>,
        level: f64,
    ) -> Result<Self> {
        let scores: Vec<f64> = per_image.iter().map(|(_, s)| *s).collect();
        let CiSummary {
            mean,
            lo,
            hi,
            level,
        } = aggregate_ci(&scores, level)?;
        Ok(Self {
            metric: metric.into(),
            per_image,
            mean,
            lo,
            hi,
            level,
        })
    }
}
