//! Deterministic kernels over rank-4 tensors.

mod conv;

pub use conv::{conv2d, conv2d_with_border, ConvWeights};
#[doc(hidden)]
pub use conv::{force_kernel_path, KernelPath};

use crate::error::{LcsError, Result};
use crate::tensor::{check_same_dims, Element, Tensor};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Activation {
    Relu,
    Sigmoid,
}

pub fn apply_activation<T: Element>(input: &Tensor<T>, kind: Activation) -> Tensor<T> {
    match kind {
        Activation::Relu => input.map(relu),
        Activation::Sigmoid => input.map(sigmoid),
    }
}

#[inline]
pub fn relu<T: Element>(v: T) -> T {
    if v > T::zero() {
        v
    } else {
        T::zero()
    }
}

/// `1 / (1 + exp(-v))`; saturates to a tiny positive value or 1, never NaN.
#[inline]
pub fn sigmoid<T: Element>(v: T) -> T {
    if v >= T::zero() {
        T::one() / (T::one() + (-v).exp())
    } else {
        let e = v.exp();
        e / (T::one() + e)
    }
}

pub fn relu_in_place<T: Element>(t: &mut Tensor<T>) {
    for v in t.data_mut() {
        *v = relu(*v);
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Elementwise {
    Add,
    Mul,
}

pub fn elementwise<T: Element>(a: &Tensor<T>, b: &Tensor<T>, op: Elementwise) -> Result<Tensor<T>> {
    let mut out = a.clone();
    elementwise_in_place(&mut out, b, op)?;
    Ok(out)
}

pub fn elementwise_in_place<T: Element>(
    a: &mut Tensor<T>,
    b: &Tensor<T>,
    op: Elementwise,
) -> Result<()> {
    check_same_dims(a, b)?;
    let f = match op {
        Elementwise::Add => |x: T, y: T| x + y,
        Elementwise::Mul => |x: T, y: T| x * y,
    };
    for (x, &y) in a.data_mut().iter_mut().zip(b.data()) {
        *x = f(*x, y);
    }
    Ok(())
}

/// Moves `r * r` channel groups into an `r`-times larger plane:
/// `out[n, o, y*r + i, x*r + j] = in[n, o*r*r + i*r + j, y, x]`.
pub fn pixel_shuffle<T: Element>(input: &Tensor<T>, r: usize) -> Result<Tensor<T>> {
    let [n, c, h, w] = input.dims();
    if r == 0 || c % (r * r) != 0 {
        return Err(LcsError::shape(format!(
            "{c} channels not divisible by r^2 for r = {r}"
        )));
    }
    let oc = c / (r * r);
    let mut out = Tensor::zeros([n, oc, h * r, w * r]);
    for b in 0..n {
        for o in 0..oc {
            for i in 0..r {
                for j in 0..r {
                    let src = input.plane(b, o * r * r + i * r + j);
                    for y in 0..h {
                        for x in 0..w {
                            out.set([b, o, y * r + i, x * r + j], src[y * w + x]);
                        }
                    }
                }
            }
        }
    }
    Ok(out)
}

/// Inverse of [`pixel_shuffle`].
pub fn pixel_unshuffle<T: Element>(input: &Tensor<T>, r: usize) -> Result<Tensor<T>> {
    let [n, c, h, w] = input.dims();
    if r == 0 || h % r != 0 || w % r != 0 {
        return Err(LcsError::shape(format!(
            "{h}x{w} plane not divisible by r = {r}"
        )));
    }
    let (oh, ow) = (h / r, w / r);
    Ok(Tensor::from_fn([n, c * r * r, oh, ow], |[b, ch, y, x]| {
        let (o, rem) = (ch / (r * r), ch % (r * r));
        input.get([b, o, y * r + rem / r, x * r + rem % r])
    }))
}

/// Sliding-window maximum without padding.
pub fn max_pool2d<T: Element>(input: &Tensor<T>, k: usize, stride: usize) -> Result<Tensor<T>> {
    let [n, c, h, w] = input.dims();
    if k == 0 || stride == 0 {
        return Err(LcsError::shape("pool window and stride must be positive"));
    }
    if h < k || w < k {
        return Err(LcsError::shape(format!(
            "{h}x{w} input smaller than {k}x{k} pool window"
        )));
    }
    let (oh, ow) = ((h - k) / stride + 1, (w - k) / stride + 1);
    let mut out = Tensor::zeros([n, c, oh, ow]);
    for b in 0..n {
        for ch in 0..c {
            let src = input.plane(b, ch);
            for y in 0..oh {
                for x in 0..ow {
                    let mut m = T::neg_infinity();
                    for dy in 0..k {
                        for &v in &src[(y * stride + dy) * w + x * stride..][..k] {
                            if v > m {
                                m = v;
                            }
                        }
                    }
                    out.set([b, ch, y, x], m);
                }
            }
        }
    }
    Ok(out)
}

/// Bilinear resize with half-pixel centers (align-corners off).
pub fn interpolate_bilinear<T: Element>(
    input: &Tensor<T>,
    out_h: usize,
    out_w: usize,
) -> Result<Tensor<T>> {
    let [n, c, h, w] = input.dims();
    if out_h == 0 || out_w == 0 {
        return Err(LcsError::shape("bilinear target size must be positive"));
    }
    if h == 0 || w == 0 {
        return Err(LcsError::shape("cannot interpolate an empty plane"));
    }
    let ys = source_taps(h, out_h);
    let xs = source_taps(w, out_w);
    let mut out = Tensor::zeros([n, c, out_h, out_w]);
    for b in 0..n {
        for ch in 0..c {
            let src = input.plane(b, ch);
            for (y, &(y0, y1, fy)) in ys.iter().enumerate() {
                for (x, &(x0, x1, fx)) in xs.iter().enumerate() {
                    let (fy, fx) = (T::from_f64_lossy(fy), T::from_f64_lossy(fx));
                    let top = src[y0 * w + x0] * (T::one() - fx) + src[y0 * w + x1] * fx;
                    let bot = src[y1 * w + x0] * (T::one() - fx) + src[y1 * w + x1] * fx;
                    out.set([b, ch, y, x], top * (T::one() - fy) + bot * fy);
                }
            }
        }
    }
    Ok(out)
}

/// `(lower index, upper index, weight of upper)` per destination coordinate.
fn source_taps(src: usize, dst: usize) -> Vec<(usize, usize, f64)> {
    let scale = src as f64 / dst as f64;
    (0..dst)
        .map(|d| {
            let s = ((d as f64 + 0.5) * scale - 0.5).clamp(0.0, (src - 1) as f64);
            let lo = s.floor() as usize;
            let hi = (lo + 1).min(src - 1);
            (lo, hi, s - lo as f64)
        })
        .collect()
}
