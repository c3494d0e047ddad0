//! NIQE pristine-model file.
//!
//! ```text
//! "NIQM"  u32 version=1  u32 patch_size  u64 fitted_on
//! f64 mean[36]
//! f64 covariance upper triangle incl. diagonal, row-major (666 values)
//! ```

use super::Cursor;
use crate::error::{LcsError, Result};
use crate::metrics::{NiqeModel, NIQE_FEATURES};

pub const NIQE_MAGIC: &[u8; 4] = b"NIQM";
pub const NIQE_VERSION: u32 = 1;

pub fn write_niqe_model(model: &NiqeModel) -> Vec<u8> {
    let mut out = Vec::new();
    out.extend_from_slice(NIQE_MAGIC);
    out.extend_from_slice(&NIQE_VERSION.to_le_bytes());
    out.extend_from_slice(&(model.patch_size as u32).to_le_bytes());
    out.extend_from_slice(&model.fitted_on.to_le_bytes());
    for v in &model.mean {
        out.extend_from_slice(&v.to_le_bytes());
    }
    for r in 0..NIQE_FEATURES {
        for c in r..NIQE_FEATURES {
            out.extend_from_slice(&model.covariance[r * NIQE_FEATURES + c].to_le_bytes());
        }
    }
    out
}

pub fn read_niqe_model(bytes: &[u8]) -> Result<NiqeModel> {
    let mut cur = Cursor::new(bytes);
    if cur.take(4).ok() != Some(NIQE_MAGIC.as_slice()) {
        return Err(LcsError::format("not a NIQM model file (bad magic)"));
    }
    let version = cur.u32()?;
    if version != NIQE_VERSION {
        return Err(LcsError::Version {
            found: version,
            expected: NIQE_VERSION,
        });
    }
    let patch_size = cur.u32()? as usize;
    let fitted_on = cur.u64()?;
    let mean = cur.f64s(NIQE_FEATURES)?;
    let upper = cur.f64s(NIQE_FEATURES * (NIQE_FEATURES + 1) / 2)?;
    if cur.remaining() != 0 {
        return Err(LcsError::format(format!(
            "{} trailing bytes",
            cur.remaining()
        )));
    }
    let mut covariance = vec![0.0; NIQE_FEATURES * NIQE_FEATURES];
    let mut it = upper.into_iter();
    for r in 0..NIQE_FEATURES {
        for c in r..NIQE_FEATURES {
            let v = it.next().unwrap();
            covariance[r * NIQE_FEATURES + c] = v;
            covariance[c * NIQE_FEATURES + r] = v;
        }
    }
    NiqeModel::new(mean, covariance, patch_size, fitted_on)
        .map_err(|e| LcsError::format(e.to_string()))
}
