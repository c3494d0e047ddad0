//! Seeded procedural test scenes.
//!
//! Scenes combine multi-octave value noise (a rough 1/f spectrum, like
//! natural textures) with soft-edged discs and bars, so they carry both
//! smooth gradients and sharp structure. They serve as deterministic
//! fixtures wherever real photographs would otherwise be needed.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::tensor::Tensor;

fn smooth(t: f32) -> f32 {
    t * t * (3.0 - 2.0 * t)
}

/// One octave of lattice value noise with `cell`-pixel spacing.
fn value_noise(rng: &mut ChaCha8Rng, h: usize, w: usize, cell: f32) -> Vec<f32> {
    let gh = (h as f32 / cell).ceil() as usize + 2;
    let gw = (w as f32 / cell).ceil() as usize + 2;
    let lattice: Vec<f32> = (0..gh * gw).map(|_| rng.gen_range(-1.0..1.0)).collect();
    let mut out = Vec::with_capacity(h * w);
    for y in 0..h {
        let fy = y as f32 / cell;
        let (iy, ty) = (fy as usize, smooth(fy.fract()));
        for x in 0..w {
            let fx = x as f32 / cell;
            let (ix, tx) = (fx as usize, smooth(fx.fract()));
            let l = |yy: usize, xx: usize| lattice[yy * gw + xx];
            let top = l(iy, ix) + (l(iy, ix + 1) - l(iy, ix)) * tx;
            let bot = l(iy + 1, ix) + (l(iy + 1, ix + 1) - l(iy + 1, ix)) * tx;
            out.push(top + (bot - top) * ty);
        }
    }
    out
}

/// A `[1, 3, h, w]` scene with values in `[0, 1]`, fully determined by
/// `seed`.
pub fn scene(h: usize, w: usize, seed: u64) -> Tensor<f32> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut lum = vec![0.0f32; h * w];
    let mut cell = h.max(w) as f32 / 3.0;
    let mut amp = 0.35f32;
    while cell >= 1.5 {
        for (l, v) in lum.iter_mut().zip(value_noise(&mut rng, h, w, cell)) {
            *l += amp * v;
        }
        cell /= 2.0;
        amp *= 0.6;
    }
    let tint: Vec<[f32; 3]> = (0..3)
        .map(|_| {
            [
                rng.gen_range(0.6..1.0),
                rng.gen_range(0.6..1.0),
                rng.gen_range(0.6..1.0),
            ]
        })
        .collect();
    let chroma = value_noise(&mut rng, h, w, h.max(w) as f32 / 4.0);
    let mut planes = [
        vec![0.0f32; h * w],
        vec![0.0f32; h * w],
        vec![0.0f32; h * w],
    ];
    for i in 0..h * w {
        let base = 0.5 + lum[i];
        let t = &tint[if chroma[i] > 0.0 { 0 } else { 1 }];
        for c in 0..3 {
            planes[c][i] = base * t[c];
        }
    }

    let shapes = rng.gen_range(6..14);
    for _ in 0..shapes {
        let color = [rng.gen::<f32>(), rng.gen::<f32>(), rng.gen::<f32>()];
        let alpha = rng.gen_range(0.4..0.9f32);
        let cy = rng.gen_range(0.0..h as f32);
        let cx = rng.gen_range(0.0..w as f32);
        let size = rng.gen_range(0.04..0.25) * h.min(w) as f32;
        let disc = rng.gen_bool(0.5);
        let angle = rng.gen_range(0.0..std::f32::consts::PI);
        let (sa, ca) = angle.sin_cos();
        for y in 0..h {
            for x in 0..w {
                let (dy, dx) = (y as f32 - cy, x as f32 - cx);
                // Signed distance to the shape boundary (negative inside).
                let dist = if disc {
                    (dy * dy + dx * dx).sqrt() - size
                } else {
                    let u = (dx * ca + dy * sa).abs() - size * 1.5;
                    let v = (-dx * sa + dy * ca).abs() - size * 0.3;
                    u.max(v)
                };
                let cover = (0.5 - dist).clamp(0.0, 1.0) * alpha;
                if cover > 0.0 {
                    let i = y * w + x;
                    for c in 0..3 {
                        planes[c][i] += (color[c] - planes[c][i]) * cover;
                    }
                }
            }
        }
    }
    let mut data = Vec::with_capacity(3 * h * w);
    for p in &planes {
        data.extend(p.iter().map(|v| v.clamp(0.0, 1.0)));
    }
    Tensor::from_vec([1, 3, h, w], data).expect("dims match data")
}

/// `img + N(0, sigma^2)` per element, clamped to `[0, 1]`.
pub fn add_gaussian_noise(img: &Tensor<f32>, sigma: f32, seed: u64) -> Tensor<f32> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let normal = Normal::new(0.0, sigma).expect("finite sigma");
    img.map(|v| (v + normal.sample(&mut rng)).clamp(0.0, 1.0))
}

/// `factor x factor` box-average downscale of every channel (leftover
/// edge rows and columns dropped).
pub fn box_downscale(img: &Tensor<f32>, factor: usize) -> Tensor<f32> {
    let [n, c, h, w] = img.dims();
    let (oh, ow) = (h / factor, w / factor);
    let inv = 1.0 / (factor * factor) as f32;
    Tensor::from_fn([n, c, oh, ow], |[b, ch, y, x]| {
        let mut s = 0.0;
        for dy in 0..factor {
            for dx in 0..factor {
                s += img.get([b, ch, y * factor + dy, x * factor + dx]);
            }
        }
        s * inv
    })
}
