//! 8-bit RGB PNG <-> `[1, 3, h, w]` FP32 tensors in `[0, 1]`.

use std::fs::File;
use std::io::BufWriter;
use std::path::Path;

use crate::error::{LcsError, Result};
use crate::tensor::Tensor;

/// Decodes an 8-bit RGB PNG; every byte maps to `byte / 255`.
pub fn decode_png(bytes: &[u8]) -> Result<Tensor<f32>> {
    let mut decoder = png::Decoder::new(bytes);
    decoder.set_transformations(png::Transformations::IDENTITY);
    let mut reader = decoder
        .read_info()
        .map_err(|e| LcsError::format(format!("PNG header: {e}")))?;
    let info = reader.info();
    if info.color_type != png::ColorType::Rgb || info.bit_depth != png::BitDepth::Eight {
        return Err(LcsError::format(format!(
            "expected 8-bit RGB PNG, got {:?} at {:?}",
            info.color_type, info.bit_depth
        )));
    }
    let (w, h) = (info.width as usize, info.height as usize);
    let mut buf = vec![0u8; reader.output_buffer_size()];
    let frame = reader
        .next_frame(&mut buf)
        .map_err(|e| LcsError::format(format!("PNG data: {e}")))?;
    let buf = &buf[..frame.buffer_size()];
    let stride = frame.line_size;
    let mut t = Tensor::zeros([1, 3, h, w]);
    let plane = h * w;
    let data = t.data_mut();
    for y in 0..h {
        let row = &buf[y * stride..y * stride + 3 * w];
        for x in 0..w {
            for c in 0..3 {
                data[c * plane + y * w + x] = row[3 * x + c] as f32 / 255.0;
            }
        }
    }
    Ok(t)
}

/// `round_half_away_from_zero(clamp(v, 0, 1) * 255)`.
#[inline]
pub fn tensor_to_byte(v: f32) -> u8 {
    let v = if v.is_nan() { 0.0 } else { v.clamp(0.0, 1.0) };
    (v as f64 * 255.0).round() as u8
}

/// Encodes a `[1, 3, h, w]` tensor as an 8-bit RGB PNG.
pub fn encode_png(t: &Tensor<f32>) -> Result<Vec<u8>> {
    let [n, c, h, w] = t.dims();
    if n != 1 || c != 3 {
        return Err(LcsError::shape(format!(
            "PNG output needs a [1, 3, h, w] tensor, got {:?}",
            t.dims()
        )));
    }
    let plane = h * w;
    let mut pixels = Vec::with_capacity(3 * plane);
    for i in 0..plane {
        for ch in 0..3 {
            pixels.push(tensor_to_byte(t.data()[ch * plane + i]));
        }
    }
    let mut out = Vec::new();
    {
        let mut enc = png::Encoder::new(&mut out, w as u32, h as u32);
        enc.set_color(png::ColorType::Rgb);
        enc.set_depth(png::BitDepth::Eight);
        let mut writer = enc
            .write_header()
            .map_err(|e| LcsError::format(format!("PNG encode: {e}")))?;
        writer
            .write_image_data(&pixels)
            .map_err(|e| LcsError::format(format!("PNG encode: {e}")))?;
    }
    Ok(out)
}

pub fn read_png(path: impl AsRef<Path>) -> Result<Tensor<f32>> {
    decode_png(&std::fs::read(path)?)
}

pub fn write_png(path: impl AsRef<Path>, t: &Tensor<f32>) -> Result<()> {
    let bytes = encode_png(t)?;
    let mut f = BufWriter::new(File::create(path)?);
    std::io::Write::write_all(&mut f, &bytes)?;
    std::io::Write::flush(&mut f)?;
    Ok(())
}
