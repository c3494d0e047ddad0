//! Structural reparameterization: folding each residual-in-residual block
//! (1x1 expand, 3x3, 1x1 reduce, two identity branches) into one 3x3
//! convolution.
//!
//! All merging runs in `f64`; [`merge_rrrb`] and [`reparameterize_model`]
//! cast to `f32` only once, at the end.

use crate::error::{LcsError, Result};
use crate::model::{canonical_layers, LayerRole, Mode, ModelConfig, ModelWeights};
use crate::ops::ConvWeights;
use crate::tensor::Element;

/// Embeds a 1x1 kernel at the center of a 3x3 kernel; padding becomes 1.
pub fn pad_1x1_to_3x3<T: Element>(w: &ConvWeights<T>) -> Result<ConvWeights<T>> {
    let [c_out, c_in_g, kh, kw] = w.dims();
    if kh != 1 || kw != 1 {
        return Err(LcsError::shape(format!(
            "expected a 1x1 kernel, got {kh}x{kw}"
        )));
    }
    let mut kernel = vec![T::zero(); c_out * c_in_g * 9];
    for (idx, &v) in w.kernel().iter().enumerate() {
        kernel[idx * 9 + 4] = v;
    }
    ConvWeights::new(
        [c_out, c_in_g, 3, 3],
        kernel,
        w.bias().to_vec(),
        w.stride(),
        w.padding() + 1,
        w.groups(),
    )
}

/// Composes two convolutions applied one after the other (`a` first).
///
/// Supported chains are `1x1 -> kxk` and `kxk -> 1x1`, stride 1, one group.
/// The merged kernel is `K[o, i] = sum_m b[o, m] * a[m, i]` tap-wise and the
/// merged bias is `b.bias + (sum of b's taps) . a.bias`. For `1x1 -> kxk`
/// the equivalence is exact when `b` pads its input with `a`'s bias (see
/// `conv2d_with_border`), as the RRRB forward does.
pub fn merge_seq(a: &ConvWeights<f64>, b: &ConvWeights<f64>) -> Result<ConvWeights<f64>> {
    for (name, w) in [("first", a), ("second", b)] {
        if w.stride() != 1 || w.groups() != 1 {
            return Err(LcsError::UnsupportedPattern(format!(
                "{name} conv has stride {} groups {}; only stride 1, one group merge",
                w.stride(),
                w.groups()
            )));
        }
    }
    if b.c_in() != a.c_out() {
        return Err(LcsError::shape(format!(
            "second conv consumes {} channels, first produces {}",
            b.c_in(),
            a.c_out()
        )));
    }
    let (c_in, mid, c_out) = (a.c_in(), a.c_out(), b.c_out());
    let a_point = a.kh() == 1 && a.kw() == 1;
    let b_point = b.kh() == 1 && b.kw() == 1;

    if a_point {
        // 1x1 then kxk: mix input channels into each of b's taps.
        let (kh, kw) = (b.kh(), b.kw());
        let mut kernel = vec![0.0; c_out * c_in * kh * kw];
        let mut bias = b.bias().to_vec();
        for o in 0..c_out {
            for m in 0..mid {
                for dy in 0..kh {
                    for dx in 0..kw {
                        let bv = b.at(o, m, dy, dx);
                        for i in 0..c_in {
                            kernel[((o * c_in + i) * kh + dy) * kw + dx] += bv * a.at(m, i, 0, 0);
                        }
                        bias[o] += bv * a.bias()[m];
                    }
                }
            }
        }
        ConvWeights::new([c_out, c_in, kh, kw], kernel, bias, 1, b.padding(), 1)
    } else if b_point {
        // kxk then 1x1: mix a's output channels.
        let (kh, kw) = (a.kh(), a.kw());
        let mut kernel = vec![0.0; c_out * c_in * kh * kw];
        let mut bias = b.bias().to_vec();
        for o in 0..c_out {
            for m in 0..mid {
                let bv = b.at(o, m, 0, 0);
                for i in 0..c_in {
                    for dy in 0..kh {
                        for dx in 0..kw {
                            kernel[((o * c_in + i) * kh + dy) * kw + dx] += bv * a.at(m, i, dy, dx);
                        }
                    }
                }
                bias[o] += bv * a.bias()[m];
            }
        }
        ConvWeights::new([c_out, c_in, kh, kw], kernel, bias, 1, a.padding(), 1)
    } else {
        Err(LcsError::UnsupportedPattern(format!(
            "{}x{} followed by {}x{}; one side must be 1x1",
            a.kh(),
            a.kw(),
            b.kh(),
            b.kw()
        )))
    }
}

/// Adds an identity branch: `kernel[o, o, center] += 1`.
pub fn add_identity<T: Element>(w: &ConvWeights<T>) -> Result<ConvWeights<T>> {
    let [c_out, c_in_g, kh, kw] = w.dims();
    if w.groups() != 1 || c_in_g != c_out {
        return Err(LcsError::shape(format!(
            "identity branch needs c_in == c_out, got {c_in_g} -> {c_out}"
        )));
    }
    if kh % 2 == 0 || kw % 2 == 0 || w.padding() != (kh - 1) / 2 || kh != kw {
        return Err(LcsError::shape(
            "identity branch needs a square odd kernel with same padding",
        ));
    }
    let mut out = w.clone();
    for o in 0..c_out {
        let idx = out.kernel_index(o, o, kh / 2, kw / 2);
        out.kernel_mut()[idx] = out.kernel()[idx] + T::one();
    }
    Ok(out)
}

/// `reduce . (k3 + I) . expand + I` as one 3x3 convolution, in `f64`.
pub fn merge_rrrb_f64(
    expand: &ConvWeights<f64>,
    k3: &ConvWeights<f64>,
    reduce: &ConvWeights<f64>,
) -> Result<ConvWeights<f64>> {
    let inner = add_identity(k3)?;
    let merged = merge_seq(&merge_seq(expand, &inner)?, reduce)?;
    add_identity(&merged)
}

/// [`merge_rrrb_f64`] on `f32` weights, cast back to `f32` at the end.
pub fn merge_rrrb(
    expand: &ConvWeights<f32>,
    k3: &ConvWeights<f32>,
    reduce: &ConvWeights<f32>,
) -> Result<ConvWeights<f32>> {
    Ok(merge_rrrb_f64(&expand.cast(), &k3.cast(), &reduce.cast())?.cast())
}

/// Replaces every RRRB triple with its merged convolution; every other layer
/// is copied as is. Returns the reparameterized config and weights.
pub fn reparameterize_model_f64(
    w: &ModelWeights<f64>,
    cfg: &ModelConfig,
) -> Result<(ModelConfig, ModelWeights<f64>)> {
    if cfg.mode != Mode::Full {
        return Err(LcsError::config("weights are already reparameterized"));
    }
    w.validate(cfg)?;
    let out_cfg = cfg.with_mode(Mode::Reparam);
    let mut out = ModelWeights::new();
    for spec in canonical_layers(&out_cfg) {
        let layer = match spec.role {
            LayerRole::RrrbMerged { block, rrrb } => {
                let get = |part: &str| {
                    let name = format!("block{block}.rrrb{rrrb}.{part}");
                    w.get(&name)
                        .ok_or_else(|| LcsError::config(format!("missing layer {name}")))
                };
                merge_rrrb_f64(get("expand")?, get("k3")?, get("reduce")?)?
            }
            _ => w
                .get(&spec.name)
                .cloned()
                .ok_or_else(|| LcsError::config(format!("missing layer {}", spec.name)))?,
        };
        out.insert(spec.name, layer)?;
    }
    Ok((out_cfg, out))
}

/// `f32` model reparameterization, merged in `f64`.
pub fn reparameterize_model(
    w: &ModelWeights<f32>,
    cfg: &ModelConfig,
) -> Result<(ModelConfig, ModelWeights<f32>)> {
    let (out_cfg, merged) = reparameterize_model_f64(&w.cast(), cfg)?;
    Ok((out_cfg, merged.cast()))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn conv(dims: [usize; 4], kernel: Vec<f64>, bias: Vec<f64>) -> ConvWeights<f64> {
        ConvWeights::new(dims, kernel, bias, 1, (dims[2] - 1) / 2, 1).unwrap()
    }

    #[test]
    fn pad_scalar_kernel() {
        let w = conv([1, 1, 1, 1], vec![2.0], vec![0.5]);
        let p = pad_1x1_to_3x3(&w).unwrap();
        assert_eq!(p.kernel(), &[0., 0., 0., 0., 2., 0., 0., 0., 0.]);
        assert_eq!(p.bias(), &[0.5]);
        assert_eq!(p.padding(), 1);
        assert!(pad_1x1_to_3x3(&p).is_err());
    }

    #[test]
    fn scalar_then_kernel_scales() {
        let a = conv([1, 1, 1, 1], vec![2.0], vec![0.0]);
        let k: Vec<f64> = (0..9).map(|v| v as f64 - 3.5).collect();
        let b = conv([1, 1, 3, 3], k.clone(), vec![0.25]);
        let m = merge_seq(&a, &b).unwrap();
        assert_eq!(
            m.kernel(),
            k.iter().map(|v| 2.0 * v).collect::<Vec<_>>().as_slice()
        );
        assert_eq!(m.bias(), &[0.25]);
    }

    #[test]
    fn bias_propagates_through_pointwise() {
        let a = conv([1, 1, 1, 1], vec![1.0], vec![3.0]);
        let b = conv([1, 1, 1, 1], vec![-0.5], vec![0.0]);
        assert_eq!(merge_seq(&a, &b).unwrap().bias(), &[-1.5]);
    }

    #[test]
    fn unsupported_patterns() {
        let k3 = conv([2, 2, 3, 3], vec![0.0; 36], vec![0.0; 2]);
        assert!(matches!(
            merge_seq(&k3, &k3),
            Err(LcsError::UnsupportedPattern(_))
        ));
        let strided = ConvWeights::new([2, 2, 1, 1], vec![0.0; 4], vec![0.0; 2], 2, 0, 1).unwrap();
        assert!(matches!(
            merge_seq(&strided, &k3),
            Err(LcsError::UnsupportedPattern(_))
        ));
    }

    #[test]
    fn identity_on_zero_kernel() {
        let z = ConvWeights::<f64>::zeros(3, 3, 3);
        let once = add_identity(&z).unwrap();
        let twice = add_identity(&once).unwrap();
        for o in 0..3 {
            for i in 0..3 {
                let expect = if o == i { 1.0 } else { 0.0 };
                assert_eq!(once.at(o, i, 1, 1), expect);
                assert_eq!(twice.at(o, i, 1, 1), 2.0 * expect);
            }
        }
        assert!(add_identity(&ConvWeights::<f64>::zeros(3, 2, 3)).is_err());
    }

    #[test]
    fn zero_rrrb_merges_to_dirac() {
        let m = merge_rrrb(
            &ConvWeights::zeros(76, 38, 1),
            &ConvWeights::zeros(76, 76, 3),
            &ConvWeights::zeros(38, 76, 1),
        )
        .unwrap();
        assert_eq!(m.dims(), [38, 38, 3, 3]);
        assert_eq!(m.param_count(), 13_034);
        for o in 0..38 {
            for i in 0..38 {
                for t in 0..9 {
                    let v = m.at(o, i, t / 3, t % 3);
                    assert_eq!(v, if o == i && t == 4 { 1.0 } else { 0.0 });
                }
            }
        }
        assert!(m.bias().iter().all(|&b| b == 0.0));
    }

    #[test]
    fn unmerged_rrrb_param_count() {
        let sizes = [
            ConvWeights::<f32>::zeros(76, 38, 1).param_count(),
            ConvWeights::<f32>::zeros(76, 76, 3).param_count(),
            ConvWeights::<f32>::zeros(38, 76, 1).param_count(),
        ];
        assert_eq!(sizes.iter().sum::<usize>(), 57_950);
    }

    #[test]
    fn double_reparameterization_is_rejected() {
        let cfg = ModelConfig {
            num_blocks: 1,
            ..ModelConfig::default()
        };
        let w = ModelWeights::<f32>::random(&cfg, 0);
        let (rcfg, rw) = reparameterize_model(&w, &cfg).unwrap();
        assert_eq!(rcfg.mode, Mode::Reparam);
        rw.validate(&rcfg).unwrap();
        assert!(matches!(
            reparameterize_model(&rw, &rcfg),
            Err(LcsError::Config(_))
        ));
    }
}
