//! `LCSW` weight container.
//!
//! ```text
//! "LCSW"  u32 version=1
//! u32 num_blocks, channels, expansion, rrrb_per_block, esa_channels, scale
//! u8 mode (0 full, 1 reparam)   u8 dtype (0 fp32, 1 int8)
//! records, in canonical layer order, until the trailer:
//!   u32 name length, UTF-8 name, u8 rank (4), u32 dims[rank]
//!   fp32: f32 kernel[prod(dims)]
//!   int8: i8 kernel[prod(dims)], f32 scales[dims[0]]
//!   f32 bias[dims[0]]
//! u32 CRC-32 (IEEE) of every preceding byte
//! ```
//!
//! Stride, padding and groups are not stored: they are fixed by the layer
//! name (see [`canonical_layers`]).

use std::collections::HashSet;

use super::Cursor;
use crate::error::{LcsError, Result};
use crate::model::{canonical_layers, LayerSpec, Mode, ModelConfig, ModelWeights};
use crate::ops::ConvWeights;
use crate::quantize::{QuantizedConvWeights, QuantizedWeights};

pub const CONTAINER_MAGIC: &[u8; 4] = b"LCSW";
pub const CONTAINER_VERSION: u32 = 1;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Dtype {
    Fp32,
    Int8,
}

/// Container payload: FP32 weights or INT8 kernels with scales.
#[derive(Clone, Debug, PartialEq)]
pub enum StoredWeights {
    Fp32(ModelWeights<f32>),
    Int8(QuantizedWeights),
}

impl StoredWeights {
    pub fn dtype(&self) -> Dtype {
        match self {
            Self::Fp32(_) => Dtype::Fp32,
            Self::Int8(_) => Dtype::Int8,
        }
    }

    pub fn param_count(&self) -> usize {
        match self {
            Self::Fp32(w) => w.param_count(),
            Self::Int8(q) => q.param_count(),
        }
    }
}

struct LayerGeometry<'a> {
    name: &'a str,
    dims: [usize; 4],
    stride: usize,
    padding: usize,
    groups: usize,
}

/// Same-set and same-shape check for either dtype.
fn check_layers<'a>(
    cfg: &ModelConfig,
    layers: impl Iterator<Item = LayerGeometry<'a>>,
) -> Result<()> {
    cfg.validate()?;
    let specs = canonical_layers(cfg);
    let mut seen = HashSet::new();
    for l in layers {
        let spec = specs.iter().find(|s| s.name == l.name).ok_or_else(|| {
            LcsError::config(format!(
                "layer {} is not part of a {:?} model",
                l.name, cfg.mode
            ))
        })?;
        if !seen.insert(l.name.to_string()) {
            return Err(LcsError::config(format!("duplicate layer {}", l.name)));
        }
        if l.dims != [spec.c_out, spec.c_in, spec.k, spec.k]
            || l.stride != spec.stride
            || l.padding != spec.padding
            || l.groups != 1
        {
            return Err(LcsError::config(format!(
                "layer {} has dims {:?}, config expects {:?}",
                l.name,
                l.dims,
                [spec.c_out, spec.c_in, spec.k, spec.k]
            )));
        }
    }
    if let Some(missing) = specs.iter().find(|s| !seen.contains(&s.name)) {
        return Err(LcsError::config(format!("missing layer {}", missing.name)));
    }
    Ok(())
}

fn fp32_geometry(w: &ModelWeights<f32>) -> impl Iterator<Item = LayerGeometry<'_>> {
    w.iter().map(|(name, l)| LayerGeometry {
        name,
        dims: l.dims(),
        stride: l.stride(),
        padding: l.padding(),
        groups: l.groups(),
    })
}

fn int8_geometry(q: &QuantizedWeights) -> impl Iterator<Item = LayerGeometry<'_>> {
    q.iter().map(|(name, l)| LayerGeometry {
        name,
        dims: l.dims(),
        stride: l.stride(),
        padding: l.padding(),
        groups: l.groups(),
    })
}

pub(crate) fn validate_stored(cfg: &ModelConfig, w: &StoredWeights) -> Result<()> {
    match w {
        StoredWeights::Fp32(w) => check_layers(cfg, fp32_geometry(w)),
        StoredWeights::Int8(q) => check_layers(cfg, int8_geometry(q)),
    }
}

fn put_u32(out: &mut Vec<u8>, v: usize) -> Result<()> {
    let v = u32::try_from(v).map_err(|_| LcsError::config(format!("{v} does not fit in u32")))?;
    out.extend_from_slice(&v.to_le_bytes());
    Ok(())
}

fn put_f32s(out: &mut Vec<u8>, vals: &[f32]) {
    for v in vals {
        out.extend_from_slice(&v.to_le_bytes());
    }
}

/// Serializes a model in canonical layer order.
pub fn write_container(cfg: &ModelConfig, weights: &StoredWeights) -> Result<Vec<u8>> {
    validate_stored(cfg, weights)?;
    let mut out = Vec::new();
    out.extend_from_slice(CONTAINER_MAGIC);
    out.extend_from_slice(&CONTAINER_VERSION.to_le_bytes());
    for v in [
        cfg.num_blocks,
        cfg.channels,
        cfg.expansion,
        cfg.rrrb_per_block,
        cfg.esa_channels,
        cfg.scale,
    ] {
        put_u32(&mut out, v)?;
    }
    out.push(match cfg.mode {
        Mode::Full => 0,
        Mode::Reparam => 1,
    });
    out.push(match weights.dtype() {
        Dtype::Fp32 => 0,
        Dtype::Int8 => 1,
    });
    for spec in canonical_layers(cfg) {
        put_u32(&mut out, spec.name.len())?;
        out.extend_from_slice(spec.name.as_bytes());
        out.push(4);
        let (dims, bias) = match weights {
            StoredWeights::Fp32(w) => {
                let l = w.get(&spec.name).expect("validated");
                (l.dims(), l.bias())
            }
            StoredWeights::Int8(q) => {
                let l = q.get(&spec.name).expect("validated");
                (l.dims(), l.bias())
            }
        };
        for d in dims {
            put_u32(&mut out, d)?;
        }
        match weights {
            StoredWeights::Fp32(w) => put_f32s(&mut out, w.get(&spec.name).unwrap().kernel()),
            StoredWeights::Int8(q) => {
                let l = q.get(&spec.name).unwrap();
                out.extend(l.qkernel().iter().map(|&v| v as u8));
                put_f32s(&mut out, l.scales());
            }
        }
        put_f32s(&mut out, bias);
    }
    let crc = crc32fast::hash(&out);
    out.extend_from_slice(&crc.to_le_bytes());
    Ok(out)
}

/// Parses and validates a container.
pub fn read_container(bytes: &[u8]) -> Result<(ModelConfig, StoredWeights)> {
    const HEADER: usize = 4 + 4 + 6 * 4 + 2;
    if bytes.len() < 4 || &bytes[..4] != CONTAINER_MAGIC {
        return Err(LcsError::format("not an LCSW weight container (bad magic)"));
    }
    if bytes.len() < HEADER + 4 {
        return Err(LcsError::format("container truncated"));
    }
    let (body, trailer) = bytes.split_at(bytes.len() - 4);
    let stored = u32::from_le_bytes(trailer.try_into().unwrap());
    let actual = crc32fast::hash(body);
    if stored != actual {
        return Err(LcsError::Corruption(format!(
            "CRC-32 mismatch: stored {stored:08x}, computed {actual:08x}"
        )));
    }
    let mut cur = Cursor::new(body);
    cur.take(4)?;
    let version = cur.u32()?;
    if version != CONTAINER_VERSION {
        return Err(LcsError::Version {
            found: version,
            expected: CONTAINER_VERSION,
        });
    }
    let mut fields = [0usize; 6];
    for f in &mut fields {
        *f = cur.u32()? as usize;
    }
    let mode = match cur.u8()? {
        0 => Mode::Full,
        1 => Mode::Reparam,
        m => return Err(LcsError::format(format!("unknown mode byte {m}"))),
    };
    let dtype = match cur.u8()? {
        0 => Dtype::Fp32,
        1 => Dtype::Int8,
        d => return Err(LcsError::format(format!("unknown dtype byte {d}"))),
    };
    let cfg = ModelConfig {
        num_blocks: fields[0],
        channels: fields[1],
        expansion: fields[2],
        rrrb_per_block: fields[3],
        esa_channels: fields[4],
        scale: fields[5],
        mode,
    };
    cfg.validate()?;
    let specs = canonical_layers(&cfg);

    let mut fp = ModelWeights::new();
    let mut q8 = QuantizedWeights::new();
    while cur.remaining() > 0 {
        let name_len = cur.u32()? as usize;
        let name = std::str::from_utf8(cur.take(name_len)?)
            .map_err(|_| LcsError::format("layer name is not UTF-8"))?
            .to_string();
        let rank = cur.u8()?;
        if rank != 4 {
            return Err(LcsError::format(format!(
                "layer {name} has rank {rank}, expected 4"
            )));
        }
        let mut dims = [0usize; 4];
        for d in &mut dims {
            *d = cur.u32()? as usize;
        }
        let spec: &LayerSpec = specs.iter().find(|s| s.name == name).ok_or_else(|| {
            LcsError::config(format!("layer {name} is not part of a {mode:?} model"))
        })?;
        let count = dims
            .iter()
            .try_fold(1usize, |a, &d| a.checked_mul(d))
            .ok_or_else(|| LcsError::format("dims overflow"))?;
        match dtype {
            Dtype::Fp32 => {
                let kernel = cur.f32s(count)?;
                let bias = cur.f32s(dims[0])?;
                let w = ConvWeights::new(dims, kernel, bias, spec.stride, spec.padding, 1)?;
                fp.insert(name, w)?;
            }
            Dtype::Int8 => {
                let qkernel = cur.take(count)?.iter().map(|&b| b as i8).collect();
                let scales = cur.f32s(dims[0])?;
                let bias = cur.f32s(dims[0])?;
                let q = QuantizedConvWeights::new(
                    dims,
                    qkernel,
                    scales,
                    bias,
                    spec.stride,
                    spec.padding,
                    1,
                )?;
                q8.insert(name, q)?;
            }
        }
    }
    let weights = match dtype {
        Dtype::Fp32 => StoredWeights::Fp32(fp),
        Dtype::Int8 => StoredWeights::Int8(q8),
    };
    validate_stored(&cfg, &weights)?;
    Ok((cfg, weights))
}
