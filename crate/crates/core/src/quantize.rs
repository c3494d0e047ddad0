//! Weights-only symmetric INT8 quantization with per-output-channel scales.
//!
//! Activations stay FP32. A quantized convolution dequantizes its kernel and
//! runs the ordinary FP32 kernel, so it inherits the conv determinism
//! contract and matches `conv2d(x, dequantize_conv(q))` bit for bit.

use std::borrow::Cow;

use crate::error::{LcsError, Result};
use crate::model::{ModelWeights, WeightSource};
use crate::ops::{conv2d, ConvWeights};
use crate::tensor::Tensor;

pub const QMAX: i8 = 127;
pub const MIN_SCALE: f32 = 1e-12;

#[derive(Clone, Debug, PartialEq)]
pub struct QuantizedConvWeights {
    qkernel: Vec<i8>,
    scales: Vec<f32>,
    bias: Vec<f32>,
    dims: [usize; 4],
    stride: usize,
    padding: usize,
    groups: usize,
}

impl QuantizedConvWeights {
    /// Assembles quantized weights, checking the value range and shapes.
    pub fn new(
        dims: [usize; 4],
        qkernel: Vec<i8>,
        scales: Vec<f32>,
        bias: Vec<f32>,
        stride: usize,
        padding: usize,
        groups: usize,
    ) -> Result<Self> {
        // Reuse the FP32 shape checks.
        ConvWeights::new(
            dims,
            vec![0.0f32; qkernel.len()],
            bias.clone(),
            stride,
            padding,
            groups,
        )?;
        if scales.len() != dims[0] {
            return Err(LcsError::shape(format!(
                "{} scales for {} output channels",
                scales.len(),
                dims[0]
            )));
        }
        if let Some(s) = scales.iter().find(|s| !(s.is_finite() && **s > 0.0)) {
            return Err(LcsError::data(format!(
                "scale {s} is not strictly positive"
            )));
        }
        if qkernel.contains(&i8::MIN) {
            return Err(LcsError::data(
                "quantized value -128 is outside the symmetric range",
            ));
        }
        Ok(Self {
            qkernel,
            scales,
            bias,
            dims,
            stride,
            padding,
            groups,
        })
    }

    pub fn dims(&self) -> [usize; 4] {
        self.dims
    }

    pub fn qkernel(&self) -> &[i8] {
        &self.qkernel
    }

    pub fn scales(&self) -> &[f32] {
        &self.scales
    }

    pub fn bias(&self) -> &[f32] {
        &self.bias
    }

    pub fn stride(&self) -> usize {
        self.stride
    }

    pub fn padding(&self) -> usize {
        self.padding
    }

    pub fn groups(&self) -> usize {
        self.groups
    }

    pub fn param_count(&self) -> usize {
        self.qkernel.len() + self.bias.len()
    }

    fn per_channel(&self) -> usize {
        self.dims[1] * self.dims[2] * self.dims[3]
    }

    /// `q * scale` evaluated exactly (the product of an 8-bit integer and
    /// an f32 is representable in f64).
    pub fn exact_value(&self, idx: usize) -> f64 {
        self.qkernel[idx] as f64 * self.scales[idx / self.per_channel()] as f64
    }
}

#[inline]
fn round_half_away(v: f64) -> f64 {
    // f64::round already rounds halfway cases away from zero.
    v.round()
}

/// Per output channel: `scale = max|w| / 127` (at least `MIN_SCALE`),
/// `q = clamp(round_half_away(w / scale), -127, 127)`; bias stays FP32.
pub fn quantize_conv(w: &ConvWeights<f32>) -> Result<QuantizedConvWeights> {
    if !w.is_finite() {
        return Err(LcsError::data("cannot quantize non-finite weights"));
    }
    let per = w.dims()[1] * w.kh() * w.kw();
    let mut qkernel = Vec::with_capacity(w.kernel().len());
    let mut scales = Vec::with_capacity(w.c_out());
    for chan in w.kernel().chunks_exact(per) {
        let max = chan.iter().fold(0.0f32, |m, v| m.max(v.abs()));
        let scale = (max / QMAX as f32).max(MIN_SCALE);
        let s = scale as f64;
        qkernel.extend(
            chan.iter()
                .map(|&v| round_half_away(v as f64 / s).clamp(-(QMAX as f64), QMAX as f64) as i8),
        );
        scales.push(scale);
    }
    QuantizedConvWeights::new(
        w.dims(),
        qkernel,
        scales,
        w.bias().to_vec(),
        w.stride(),
        w.padding(),
        w.groups(),
    )
}

/// `kernel[o, .] = q[o, .] * scale[o]` as FP32.
pub fn dequantize_conv(q: &QuantizedConvWeights) -> ConvWeights<f32> {
    let per = q.per_channel();
    let kernel = q
        .qkernel
        .chunks_exact(per)
        .zip(&q.scales)
        .flat_map(|(chan, &s)| chan.iter().map(move |&v| v as f32 * s))
        .collect();
    ConvWeights::new(
        q.dims,
        kernel,
        q.bias.clone(),
        q.stride,
        q.padding,
        q.groups,
    )
    .expect("quantized weights were validated on construction")
}

/// Convolution with INT8 weights and FP32 activations.
pub fn conv2d_q(input: &Tensor<f32>, q: &QuantizedConvWeights) -> Result<Tensor<f32>> {
    conv2d(input, &dequantize_conv(q))
}

/// A whole model with INT8 kernels, layer order preserved.
#[derive(Clone, Debug, PartialEq, Default)]
pub struct QuantizedWeights {
    layers: Vec<(String, QuantizedConvWeights)>,
}

impl QuantizedWeights {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, name: impl Into<String>, q: QuantizedConvWeights) -> Result<()> {
        let name = name.into();
        if self.get(&name).is_some() {
            return Err(LcsError::config(format!("duplicate layer {name}")));
        }
        self.layers.push((name, q));
        Ok(())
    }

    pub fn get(&self, name: &str) -> Option<&QuantizedConvWeights> {
        self.layers.iter().find(|(n, _)| n == name).map(|(_, q)| q)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &QuantizedConvWeights)> {
        self.layers.iter().map(|(n, q)| (n.as_str(), q))
    }

    pub fn len(&self) -> usize {
        self.layers.len()
    }

    pub fn is_empty(&self) -> bool {
        self.layers.is_empty()
    }

    pub fn param_count(&self) -> usize {
        self.layers.iter().map(|(_, q)| q.param_count()).sum()
    }

    /// FP32 view of every layer.
    pub fn dequantize(&self) -> ModelWeights<f32> {
        let mut out = ModelWeights::new();
        for (name, q) in &self.layers {
            out.insert(name.clone(), dequantize_conv(q))
                .expect("names are unique");
        }
        out
    }
}

/// Post-training quantization of every layer.
pub fn quantize_model(w: &ModelWeights<f32>) -> Result<QuantizedWeights> {
    let mut out = QuantizedWeights::new();
    for (name, layer) in w.iter() {
        out.insert(name, quantize_conv(layer)?)?;
    }
    Ok(out)
}

impl WeightSource<f32> for QuantizedWeights {
    fn layer(&self, name: &str) -> Result<Cow<'_, ConvWeights<f32>>> {
        self.get(name)
            .map(|q| Cow::Owned(dequantize_conv(q)))
            .ok_or_else(|| LcsError::config(format!("missing layer {name}")))
    }
}
