//! Rough single-layer throughput numbers for the conv kernel.

use std::time::Instant;

use lcs_core::ops::{conv2d, ConvWeights};
use lcs_core::Tensor;

fn run<T: lcs_core::Element>(label: &str, c_in: usize, c_out: usize, k: usize, h: usize, w: usize) {
    let x = Tensor::<T>::from_fn([1, c_in, h, w], |[_, c, y, x]| {
        T::from_f64_lossy(((c + y * 3 + x) % 7) as f64 * 0.1)
    });
    let wts = ConvWeights::<T>::zeros(c_out, c_in, k);
    let t0 = Instant::now();
    let y = conv2d(&x, &wts).unwrap();
    let dt = t0.elapsed().as_secs_f64();
    let macs = (c_in * c_out * k * k * h * w) as f64;
    println!(
        "{label:>24}: {:.3}s  {:.2} GMAC/s  ({:?})",
        dt,
        macs / dt / 1e9,
        y.dims()
    );
}

fn main() {
    run::<f32>("f32 38->38 3x3 720x960", 38, 38, 3, 720, 960);
    run::<f32>("f32 76->76 3x3 256x256", 76, 76, 3, 256, 256);
    run::<f32>("f32 38->76 1x1 256x256", 38, 76, 1, 256, 256);
    run::<f64>("f64 76->76 3x3 128x128", 76, 76, 3, 128, 128);
}
