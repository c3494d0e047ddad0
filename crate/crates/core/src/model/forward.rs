use std::borrow::Cow;

use super::layout::{esa_name, rrrb_name};
use super::weights::WeightSource;
use super::{Mode, ModelConfig};
use crate::error::{LcsError, Result};
use crate::ops::{
    conv2d, conv2d_with_border, elementwise_in_place, interpolate_bilinear, max_pool2d,
    pixel_shuffle, relu_in_place, sigmoid, ConvWeights, Elementwise,
};
use crate::tensor::{Element, Tensor};

/// Residual-in-residual block, pre-activation:
/// `v = expand(x); y = x + reduce(k3(v) + v)`.
///
/// The 3x3 convolution pads `v` with the expand bias rather than zero, which
/// is the value `v` would take on a zero-padded `x`; with that border the
/// block is exactly one 3x3 convolution of `x` (see `reparam::merge_rrrb`).
pub fn rrrb_forward<T: Element>(
    expand: &ConvWeights<T>,
    k3: &ConvWeights<T>,
    reduce: &ConvWeights<T>,
    x: &Tensor<T>,
) -> Result<Tensor<T>> {
    let v = conv2d(x, expand)?;
    let mut u = conv2d_with_border(&v, k3, expand.bias())?;
    elementwise_in_place(&mut u, &v, Elementwise::Add)?;
    drop(v);
    let mut y = conv2d(&u, reduce)?;
    elementwise_in_place(&mut y, x, Elementwise::Add)?;
    Ok(y)
}

/// The five convolutions of an enhanced spatial attention gate.
pub struct EsaLayers<'a, T: Element> {
    pub reduce: Cow<'a, ConvWeights<T>>,
    pub stride: Cow<'a, ConvWeights<T>>,
    pub pool_conv: Cow<'a, ConvWeights<T>>,
    pub skip: Cow<'a, ConvWeights<T>>,
    pub expand: Cow<'a, ConvWeights<T>>,
}

impl<'a, T: Element> EsaLayers<'a, T> {
    pub fn load<W: WeightSource<T>>(src: &'a W, block: usize) -> Result<Self> {
        Ok(Self {
            reduce: src.layer(&esa_name(block, "reduce"))?,
            stride: src.layer(&esa_name(block, "stride"))?,
            pool_conv: src.layer(&esa_name(block, "pool_conv"))?,
            skip: src.layer(&esa_name(block, "skip"))?,
            expand: src.layer(&esa_name(block, "expand"))?,
        })
    }
}

/// `x * sigmoid(expand(up(relu(pool_conv(maxpool(stride(f))))) + skip(f)))`
/// with `f = reduce(x)`, max-pool window 7 and stride 3.
pub fn esa_forward<T: Element>(esa: &EsaLayers<'_, T>, x: &Tensor<T>) -> Result<Tensor<T>> {
    let f = conv2d(x, &esa.reduce)?;
    let g = conv2d(&f, &esa.stride)?;
    let g = max_pool2d(&g, 7, 3)
        .map_err(|e| LcsError::shape(format!("ESA input {}x{} too small: {e}", x.h(), x.w())))?;
    let mut g = conv2d(&g, &esa.pool_conv)?;
    relu_in_place(&mut g);
    let mut g = interpolate_bilinear(&g, f.h(), f.w())?;
    elementwise_in_place(&mut g, &conv2d(&f, &esa.skip)?, Elementwise::Add)?;
    let mut out = conv2d(&g, &esa.expand)?;
    for (m, &v) in out.data_mut().iter_mut().zip(x.data()) {
        *m = v * sigmoid(*m);
    }
    Ok(out)
}

/// One residual feature block's weights, in either storage mode.
pub struct BlockLayers<'a, T: Element> {
    /// `[expand, k3, reduce]` per RRRB (full mode) or `[merged]` (reparam).
    pub rrrbs: Vec<Vec<Cow<'a, ConvWeights<T>>>>,
    pub conv1: Cow<'a, ConvWeights<T>>,
    pub esa: EsaLayers<'a, T>,
}

impl<'a, T: Element> BlockLayers<'a, T> {
    pub fn load<W: WeightSource<T>>(src: &'a W, cfg: &ModelConfig, block: usize) -> Result<Self> {
        let parts: &[&str] = match cfg.mode {
            Mode::Full => &["expand", "k3", "reduce"],
            Mode::Reparam => &["merged"],
        };
        let rrrbs = (0..cfg.rrrb_per_block)
            .map(|j| {
                parts
                    .iter()
                    .map(|p| src.layer(&rrrb_name(block, j, p)))
                    .collect::<Result<Vec<_>>>()
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            rrrbs,
            conv1: src.layer(&format!("block{block}.conv1"))?,
            esa: EsaLayers::load(src, block)?,
        })
    }
}

/// `relu(rrrb(.))` repeated, then the block 1x1 conv, then the ESA gate.
pub fn rrfb_forward<T: Element>(block: &BlockLayers<'_, T>, x: &Tensor<T>) -> Result<Tensor<T>> {
    let mut y = x.clone();
    for rrrb in &block.rrrbs {
        y = match rrrb.as_slice() {
            [expand, k3, reduce] => rrrb_forward(expand, k3, reduce, &y)?,
            [merged] => conv2d(&y, merged)?,
            _ => return Err(LcsError::config("RRRB must have 1 or 3 layers")),
        };
        relu_in_place(&mut y);
    }
    let y = conv2d(&y, &block.conv1)?;
    esa_forward(&block.esa, &y)
}

/// Full generator: head conv, residual feature blocks, trunk conv plus the
/// head output, tail conv, pixel shuffle, clamp to `[0, 1]`.
pub fn forward<T: Element, W: WeightSource<T>>(
    cfg: &ModelConfig,
    weights: &W,
    lr: &Tensor<T>,
) -> Result<Tensor<T>> {
    cfg.validate()?;
    if lr.c() != 3 {
        return Err(LcsError::shape(format!(
            "input must have 3 channels, got {}",
            lr.c()
        )));
    }
    let head = conv2d(lr, &*weights.layer("head")?)?;
    let mut y = head.clone();
    for b in 0..cfg.num_blocks {
        let block = BlockLayers::load(weights, cfg, b)?;
        y = rrfb_forward(&block, &y)?;
    }
    let mut y = conv2d(&y, &*weights.layer("trunk")?)?;
    elementwise_in_place(&mut y, &head, Elementwise::Add)?;
    drop(head);
    let tail = weights.layer("tail")?;
    if tail.c_out() != 3 * cfg.scale * cfg.scale {
        return Err(LcsError::config(format!(
            "tail has {} outputs, scale {} needs {}",
            tail.c_out(),
            cfg.scale,
            3 * cfg.scale * cfg.scale
        )));
    }
    let y = conv2d(&y, &tail)?;
    let mut out = pixel_shuffle(&y, cfg.scale)?;
    for v in out.data_mut() {
        *v = v.max(T::zero()).min(T::one());
    }
    Ok(out)
}
