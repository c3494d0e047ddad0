//! Single-scale SSIM on BT.601 luminance with an 11x11, sigma 1.5 Gaussian
//! window, K1 = 0.01, K2 = 0.03, dynamic range 1. The map is averaged over
//! window positions that lie fully inside the image.

use crate::error::{LcsError, Result};
use crate::tensor::{check_same_dims, Element, Tensor};

const WINDOW: usize = 11;
const SIGMA: f64 = 1.5;
const C1: f64 = 0.01 * 0.01;
const C2: f64 = 0.03 * 0.03;

/// `Y = 0.299 R + 0.587 G + 0.114 B` for 3-channel images, the single
/// channel otherwise. Returns an `h x w` row-major plane.
pub fn luminance<T: Element>(img: &Tensor<T>, n: usize) -> Result<Vec<f64>> {
    let c = img.c();
    let f = |v: T| v.to_f64().unwrap();
    match c {
        1 => Ok(img.plane(n, 0).iter().map(|&v| f(v)).collect()),
        3 => {
            let (r, g, b) = (img.plane(n, 0), img.plane(n, 1), img.plane(n, 2));
            Ok((0..r.len())
                .map(|i| 0.299 * f(r[i]) + 0.587 * f(g[i]) + 0.114 * f(b[i]))
                .collect())
        }
        _ => Err(LcsError::shape(format!(
            "expected 1 or 3 channels, got {c}"
        ))),
    }
}

fn gaussian_taps() -> [f64; WINDOW] {
    let mut taps = [0.0; WINDOW];
    let half = (WINDOW / 2) as f64;
    for (i, t) in taps.iter_mut().enumerate() {
        let d = i as f64 - half;
        *t = (-d * d / (2.0 * SIGMA * SIGMA)).exp();
    }
    let sum: f64 = taps.iter().sum();
    taps.iter_mut().for_each(|t| *t /= sum);
    taps
}

/// Separable valid-mode filter.
fn filter_valid(src: &[f64], h: usize, w: usize, taps: &[f64; WINDOW]) -> Vec<f64> {
    let ow = w - WINDOW + 1;
    let oh = h - WINDOW + 1;
    let mut horiz = vec![0.0; h * ow];
    for y in 0..h {
        let row = &src[y * w..(y + 1) * w];
        for x in 0..ow {
            horiz[y * ow + x] = taps
                .iter()
                .zip(&row[x..x + WINDOW])
                .map(|(t, v)| t * v)
                .sum();
        }
    }
    let mut out = vec![0.0; oh * ow];
    for y in 0..oh {
        for x in 0..ow {
            out[y * ow + x] = taps
                .iter()
                .enumerate()
                .map(|(k, t)| t * horiz[(y + k) * ow + x])
                .sum();
        }
    }
    out
}

pub fn ssim<T: Element>(a: &Tensor<T>, b: &Tensor<T>) -> Result<f64> {
    check_same_dims(a, b)?;
    if a.n() != 1 {
        return Err(LcsError::shape("SSIM expects a single image (n = 1)"));
    }
    let (h, w) = (a.h(), a.w());
    if h < WINDOW || w < WINDOW {
        return Err(LcsError::shape(format!(
            "{h}x{w} image smaller than the {WINDOW}x{WINDOW} window"
        )));
    }
    let ya = luminance(a, 0)?;
    let yb = luminance(b, 0)?;
    let taps = gaussian_taps();
    let prod = |p: &[f64], q: &[f64]| p.iter().zip(q).map(|(x, y)| x * y).collect::<Vec<_>>();
    let mu_a = filter_valid(&ya, h, w, &taps);
    let mu_b = filter_valid(&yb, h, w, &taps);
    let e_aa = filter_valid(&prod(&ya, &ya), h, w, &taps);
    let e_bb = filter_valid(&prod(&yb, &yb), h, w, &taps);
    let e_ab = filter_valid(&prod(&ya, &yb), h, w, &taps);
    let n = mu_a.len() as f64;
    let total: f64 = (0..mu_a.len())
        .map(|i| {
            let (ma, mb) = (mu_a[i], mu_b[i]);
            let var_a = e_aa[i] - ma * ma;
            let var_b = e_bb[i] - mb * mb;
            let cov = e_ab[i] - ma * mb;
            ((2.0 * (ma * mb) + C1) * (2.0 * cov + C2))
                / ((ma * ma + mb * mb + C1) * (var_a + var_b + C2))
        })
        .sum();
    Ok(total / n)
}
