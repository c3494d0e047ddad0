//! Natural image quality evaluator.
//!
//! Features follow the classic construction: the grey image (0..255 scale)
//! is normalised into MSCN coefficients at full and half resolution, cut
//! into `patch_size` blocks (half that at the second scale), and each block
//! contributes 18 AGGD parameters per scale. Blocks are ranked by their
//! mean local deviation at full resolution and the sharpest 75% are kept.
//! An image is scored by the Mahalanobis-style distance between the Gaussian
//! fitted to its block features and the pristine model.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rayon::prelude::*;

use super::aggd::fit_aggd;
use super::ssim::luminance;
use crate::error::{LcsError, Result};
use crate::tensor::{Element, Tensor};

pub const NIQE_FEATURES: usize = 36;
pub const DEFAULT_PATCH_SIZE: usize = 96;

const PER_SCALE: usize = NIQE_FEATURES / 2;
const KEEP_FRACTION: f64 = 0.75;
const MSCN_WINDOW: usize = 7;
const MSCN_SIGMA: f64 = 7.0 / 6.0;
const MSCN_C: f64 = 1.0;
const RIDGE: f64 = 1e-6;
const MIN_CORPUS: usize = 10;
const MIN_PATCH: usize = 16;

/// Multivariate Gaussian over the 36 block features of pristine images.
#[derive(Clone, Debug, PartialEq)]
pub struct NiqeModel {
    pub mean: Vec<f64>,
    /// Row-major 36 x 36.
    pub covariance: Vec<f64>,
    pub patch_size: usize,
    /// Number of blocks the statistics were computed from.
    pub fitted_on: u64,
}

impl NiqeModel {
    pub fn new(
        mean: Vec<f64>,
        covariance: Vec<f64>,
        patch_size: usize,
        fitted_on: u64,
    ) -> Result<Self> {
        if mean.len() != NIQE_FEATURES || covariance.len() != NIQE_FEATURES * NIQE_FEATURES {
            return Err(LcsError::data(format!(
                "NIQE model needs {NIQE_FEATURES} means and a {NIQE_FEATURES}x{NIQE_FEATURES} covariance"
            )));
        }
        if mean.iter().chain(&covariance).any(|v| !v.is_finite()) {
            return Err(LcsError::data("non-finite NIQE model entry"));
        }
        for r in 0..NIQE_FEATURES {
            for c in r + 1..NIQE_FEATURES {
                if covariance[r * NIQE_FEATURES + c] != covariance[c * NIQE_FEATURES + r] {
                    return Err(LcsError::data("NIQE covariance is not symmetric"));
                }
            }
        }
        check_patch_size(patch_size)?;
        Ok(Self {
            mean,
            covariance,
            patch_size,
            fitted_on,
        })
    }
}

fn check_patch_size(p: usize) -> Result<()> {
    if p < MIN_PATCH || !p.is_multiple_of(2) {
        return Err(LcsError::data(format!(
            "NIQE patch size {p} must be even and at least {MIN_PATCH}"
        )));
    }
    Ok(())
}

/// Row-major single-channel plane.
struct Plane {
    h: usize,
    w: usize,
    data: Vec<f64>,
}

impl Plane {
    fn at(&self, y: usize, x: usize) -> f64 {
        self.data[y * self.w + x]
    }

    fn half(&self) -> Plane {
        let (h, w) = (self.h / 2, self.w / 2);
        let mut data = Vec::with_capacity(h * w);
        for y in 0..h {
            for x in 0..w {
                let s = self.at(2 * y, 2 * x)
                    + self.at(2 * y, 2 * x + 1)
                    + self.at(2 * y + 1, 2 * x)
                    + self.at(2 * y + 1, 2 * x + 1);
                data.push(s / 4.0);
            }
        }
        Plane { h, w, data }
    }
}

fn mscn_taps() -> [f64; MSCN_WINDOW] {
    let mut taps = [0.0; MSCN_WINDOW];
    let half = (MSCN_WINDOW / 2) as f64;
    for (i, t) in taps.iter_mut().enumerate() {
        let d = i as f64 - half;
        *t = (-d * d / (2.0 * MSCN_SIGMA * MSCN_SIGMA)).exp();
    }
    let sum: f64 = taps.iter().sum();
    taps.iter_mut().for_each(|t| *t /= sum);
    taps
}

/// Same-size separable Gaussian filter with replicated borders.
fn blur(p: &Plane) -> Vec<f64> {
    let taps = mscn_taps();
    let r = (MSCN_WINDOW / 2) as isize;
    let clamp = |v: isize, n: usize| v.clamp(0, n as isize - 1) as usize;
    let mut horiz = vec![0.0; p.h * p.w];
    for y in 0..p.h {
        for x in 0..p.w {
            horiz[y * p.w + x] = taps
                .iter()
                .enumerate()
                .map(|(k, t)| t * p.at(y, clamp(x as isize + k as isize - r, p.w)))
                .sum();
        }
    }
    let mut out = vec![0.0; p.h * p.w];
    for y in 0..p.h {
        for x in 0..p.w {
            out[y * p.w + x] = taps
                .iter()
                .enumerate()
                .map(|(k, t)| t * horiz[clamp(y as isize + k as isize - r, p.h) * p.w + x])
                .sum();
        }
    }
    out
}

/// MSCN coefficients and the local deviation map.
fn mscn(p: &Plane) -> (Plane, Plane) {
    let mu = blur(p);
    let sq = Plane {
        h: p.h,
        w: p.w,
        data: p.data.iter().map(|v| v * v).collect(),
    };
    let mu_sq = blur(&sq);
    let sigma: Vec<f64> = mu
        .iter()
        .zip(&mu_sq)
        .map(|(m, s)| (s - m * m).abs().sqrt())
        .collect();
    let coeffs = p
        .data
        .iter()
        .zip(&mu)
        .zip(&sigma)
        .map(|((v, m), s)| (v - m) / (s + MSCN_C))
        .collect();
    (
        Plane {
            h: p.h,
            w: p.w,
            data: coeffs,
        },
        Plane {
            h: p.h,
            w: p.w,
            data: sigma,
        },
    )
}

/// The 18 AGGD parameters of one block: the coefficient fit, then the four
/// neighbour-product fits (horizontal, vertical, two diagonals) with
/// wrap-around inside the block.
fn block_features(m: &Plane, y0: usize, x0: usize, p: usize) -> Result<[f64; PER_SCALE]> {
    let at = |y: usize, x: usize| m.at(y0 + y % p, x0 + x % p);
    let mut out = [0.0; PER_SCALE];
    let coeffs: Vec<f64> = (0..p)
        .flat_map(|y| (0..p).map(move |x| (y, x)))
        .map(|(y, x)| at(y, x))
        .collect();
    let fit = fit_aggd(&coeffs)?;
    out[0] = fit.alpha;
    out[1] = (fit.beta_l() + fit.beta_r()) / 2.0;
    let shifts: [(usize, usize); 4] = [(0, 1), (1, 0), (1, 1), (1, p - 1)];
    for (i, (dy, dx)) in shifts.into_iter().enumerate() {
        let prods: Vec<f64> = (0..p)
            .flat_map(|y| (0..p).map(move |x| (y, x)))
            .map(|(y, x)| at(y, x) * at(y + dy, x + dx))
            .collect();
        let fit = fit_aggd(&prods)?;
        out[2 + 4 * i..6 + 4 * i].copy_from_slice(&[
            fit.alpha,
            fit.mean(),
            fit.beta_l(),
            fit.beta_r(),
        ]);
    }
    Ok(out)
}

/// Features of the selected blocks of one image, in raster order of the
/// block grid. Blocks whose statistics are degenerate (flat regions) are
/// dropped.
pub fn patch_features<T: Element>(
    img: &Tensor<T>,
    patch_size: usize,
) -> Result<Vec<[f64; NIQE_FEATURES]>> {
    check_patch_size(patch_size)?;
    if img.n() != 1 {
        return Err(LcsError::shape("NIQE expects a single image (n = 1)"));
    }
    let (h, w) = (img.h(), img.w());
    if h.min(w) < 2 * patch_size {
        return Err(LcsError::shape(format!(
            "{h}x{w} image too small for NIQE with {patch_size}px blocks (needs {} per side)",
            2 * patch_size
        )));
    }
    let (gh, gw) = (h / patch_size, w / patch_size);
    let (ch, cw) = (gh * patch_size, gw * patch_size);
    let luma = luminance(img, 0)?;
    let mut data = Vec::with_capacity(ch * cw);
    for y in 0..ch {
        data.extend(luma[y * w..y * w + cw].iter().map(|v| v * 255.0));
    }
    let full = Plane { h: ch, w: cw, data };
    let half = full.half();
    let (m1, sigma) = mscn(&full);
    let (m2, _) = mscn(&half);

    let p = patch_size;
    let mut ranked: Vec<(usize, f64)> = (0..gh * gw)
        .map(|b| {
            let (y0, x0) = ((b / gw) * p, (b % gw) * p);
            let s: f64 = (0..p)
                .flat_map(|y| (0..p).map(move |x| (y, x)))
                .map(|(y, x)| sigma.at(y0 + y, x0 + x))
                .sum();
            (b, s / (p * p) as f64)
        })
        .collect();
    ranked.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
    let keep = ((ranked.len() as f64 * KEEP_FRACTION).ceil() as usize).max(1);
    let mut chosen: Vec<usize> = ranked[..keep].iter().map(|&(b, _)| b).collect();
    chosen.sort_unstable();

    let feats: Vec<Option<[f64; NIQE_FEATURES]>> = chosen
        .par_iter()
        .map(|&b| {
            let (by, bx) = (b / gw, b % gw);
            let f1 = block_features(&m1, by * p, bx * p, p).ok()?;
            let f2 = block_features(&m2, by * p / 2, bx * p / 2, p / 2).ok()?;
            let mut f = [0.0; NIQE_FEATURES];
            f[..PER_SCALE].copy_from_slice(&f1);
            f[PER_SCALE..].copy_from_slice(&f2);
            f.iter().all(|v| v.is_finite()).then_some(f)
        })
        .collect();
    Ok(feats.into_iter().flatten().collect())
}

fn mean_and_covariance(feats: &[[f64; NIQE_FEATURES]]) -> (Vec<f64>, Vec<f64>) {
    let n = feats.len();
    let mut mean = vec![0.0; NIQE_FEATURES];
    for f in feats {
        for (m, v) in mean.iter_mut().zip(f) {
            *m += v;
        }
    }
    mean.iter_mut().for_each(|m| *m /= n as f64);
    let mut cov = vec![0.0; NIQE_FEATURES * NIQE_FEATURES];
    if n > 1 {
        for r in 0..NIQE_FEATURES {
            for c in r..NIQE_FEATURES {
                let s: f64 = feats
                    .iter()
                    .map(|f| (f[r] - mean[r]) * (f[c] - mean[c]))
                    .sum();
                let v = s / (n - 1) as f64;
                cov[r * NIQE_FEATURES + c] = v;
                cov[c * NIQE_FEATURES + r] = v;
            }
        }
    }
    (mean, cov)
}

/// `sqrt(d^T ((cov + model.cov) / 2)^+ d)` with `d = mean - model.mean`,
/// using the pseudo-inverse so the result is always a finite, non-negative
/// number.
pub fn niqe_distance(mean: &[f64], covariance: &[f64], model: &NiqeModel) -> Result<f64> {
    let n = NIQE_FEATURES;
    if mean.len() != n || covariance.len() != n * n {
        return Err(LcsError::shape("feature statistics must be 36 / 36x36"));
    }
    let d = DVector::from_iterator(n, mean.iter().zip(&model.mean).map(|(a, b)| a - b));
    let pooled = DMatrix::from_fn(n, n, |r, c| {
        let a = (covariance[r * n + c] + model.covariance[r * n + c]) / 2.0;
        let b = (covariance[c * n + r] + model.covariance[c * n + r]) / 2.0;
        (a + b) / 2.0
    });
    let eig = SymmetricEigen::new(pooled);
    let max_ev = eig.eigenvalues.iter().fold(0.0f64, |m, &v| m.max(v.abs()));
    let tol = max_ev * n as f64 * f64::EPSILON;
    let mut d2 = 0.0;
    for (i, &ev) in eig.eigenvalues.iter().enumerate() {
        if ev > tol {
            let proj = eig.eigenvectors.column(i).dot(&d);
            d2 += proj * proj / ev;
        }
    }
    Ok(d2.max(0.0).sqrt())
}

/// NIQE score of a single image (`n = 1`, 1 or 3 channels, values in
/// `[0, 1]`). Lower is more natural.
pub fn niqe<T: Element>(img: &Tensor<T>, model: &NiqeModel) -> Result<f64> {
    let feats = patch_features(img, model.patch_size)?;
    if feats.is_empty() {
        return Err(LcsError::data("no textured blocks to score"));
    }
    let (mean, cov) = mean_and_covariance(&feats);
    niqe_distance(&mean, &cov, model)
}

/// Fit the pristine model on at least ten images.
pub fn fit_niqe_model<T: Element>(corpus: &[Tensor<T>], patch_size: usize) -> Result<NiqeModel> {
    check_patch_size(patch_size)?;
    if corpus.len() < MIN_CORPUS {
        return Err(LcsError::data(format!(
            "NIQE fit needs at least {MIN_CORPUS} images, got {}",
            corpus.len()
        )));
    }
    let mut feats = Vec::new();
    for (i, img) in corpus.iter().enumerate() {
        let f = patch_features(img, patch_size).map_err(|e| match e {
            LcsError::Shape(msg) => LcsError::data(format!("corpus image {i}: {msg}")),
            other => other,
        })?;
        feats.extend(f);
    }
    if feats.len() < 2 {
        return Err(LcsError::data("corpus yields fewer than two usable blocks"));
    }
    let (mean, mut cov) = mean_and_covariance(&feats);
    for i in 0..NIQE_FEATURES {
        cov[i * NIQE_FEATURES + i] += RIDGE;
    }
    NiqeModel::new(mean, cov, patch_size, feats.len() as u64)
}
