//! Direct NCHW convolution.
//!
//! Every output element is reduced in a fixed order: the accumulator starts
//! at the bias, then adds `kernel * padded_input` for input channel, kernel
//! row and kernel column ascending. Padded taps are included in the sum.
//! Vectorization only happens across neighbouring output pixels, so the
//! per-pixel order is the same in the fast and the generic path, and the
//! result does not depend on the number of worker threads.

use std::borrow::Cow;
use std::sync::atomic::{AtomicU8, Ordering};

use rayon::prelude::*;

use crate::error::{LcsError, Result};
use crate::tensor::{Element, Tensor};

/// Convolution kernel `(c_out, c_in / groups, kh, kw)`, bias and geometry.
#[derive(Clone, Debug, PartialEq)]
pub struct ConvWeights<T = f32> {
    kernel: Vec<T>,
    bias: Vec<T>,
    dims: [usize; 4],
    stride: usize,
    padding: usize,
    groups: usize,
}

impl<T: Element> ConvWeights<T> {
    pub fn new(
        dims: [usize; 4],
        kernel: Vec<T>,
        bias: Vec<T>,
        stride: usize,
        padding: usize,
        groups: usize,
    ) -> Result<Self> {
        let [c_out, c_in_g, kh, kw] = dims;
        if dims.contains(&0) {
            return Err(LcsError::shape(format!("zero-sized kernel dims {dims:?}")));
        }
        if stride == 0 || groups == 0 {
            return Err(LcsError::shape("stride and groups must be positive"));
        }
        if c_out % groups != 0 {
            return Err(LcsError::shape(format!(
                "c_out {c_out} not divisible by groups {groups}"
            )));
        }
        if kernel.len() != c_out * c_in_g * kh * kw {
            return Err(LcsError::shape(format!(
                "kernel holds {} values, dims {dims:?} need {}",
                kernel.len(),
                c_out * c_in_g * kh * kw
            )));
        }
        if bias.len() != c_out {
            return Err(LcsError::shape(format!(
                "bias holds {} values for {c_out} output channels",
                bias.len()
            )));
        }
        Ok(Self {
            kernel,
            bias,
            dims,
            stride,
            padding,
            groups,
        })
    }

    /// Zero kernel and bias; `padding = (k - 1) / 2`, stride 1, one group.
    pub fn zeros(c_out: usize, c_in: usize, k: usize) -> Self {
        Self::new(
            [c_out, c_in, k, k],
            vec![T::zero(); c_out * c_in * k * k],
            vec![T::zero(); c_out],
            1,
            (k - 1) / 2,
            1,
        )
        .expect("valid zero kernel")
    }

    pub fn dims(&self) -> [usize; 4] {
        self.dims
    }

    pub fn c_out(&self) -> usize {
        self.dims[0]
    }

    /// Total input channels (`c_in / groups` per group times `groups`).
    pub fn c_in(&self) -> usize {
        self.dims[1] * self.groups
    }

    pub fn kh(&self) -> usize {
        self.dims[2]
    }

    pub fn kw(&self) -> usize {
        self.dims[3]
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

    pub fn kernel(&self) -> &[T] {
        &self.kernel
    }

    pub fn kernel_mut(&mut self) -> &mut [T] {
        &mut self.kernel
    }

    pub fn bias(&self) -> &[T] {
        &self.bias
    }

    pub fn bias_mut(&mut self) -> &mut [T] {
        &mut self.bias
    }

    #[inline]
    pub fn kernel_index(&self, o: usize, i: usize, dy: usize, dx: usize) -> usize {
        ((o * self.dims[1] + i) * self.dims[2] + dy) * self.dims[3] + dx
    }

    #[inline]
    pub fn at(&self, o: usize, i: usize, dy: usize, dx: usize) -> T {
        self.kernel[self.kernel_index(o, i, dy, dx)]
    }

    /// Number of scalar parameters (kernel plus bias).
    pub fn param_count(&self) -> usize {
        self.kernel.len() + self.bias.len()
    }

    pub fn with_padding(mut self, padding: usize) -> Self {
        self.padding = padding;
        self
    }

    pub fn cast<U: Element>(&self) -> ConvWeights<U> {
        let conv = |v: &T| U::from_f64_lossy(v.to_f64().unwrap_or(f64::NAN));
        ConvWeights {
            kernel: self.kernel.iter().map(conv).collect(),
            bias: self.bias.iter().map(conv).collect(),
            dims: self.dims,
            stride: self.stride,
            padding: self.padding,
            groups: self.groups,
        }
    }

    pub fn is_finite(&self) -> bool {
        self.kernel.iter().chain(&self.bias).all(|v| v.is_finite())
    }

    /// Output spatial size for an `h x w` input.
    pub fn output_hw(&self, h: usize, w: usize) -> Result<(usize, usize)> {
        let out = |size: usize, k: usize| {
            let padded = size + 2 * self.padding;
            if padded < k {
                None
            } else {
                Some((padded - k) / self.stride + 1)
            }
        };
        match (out(h, self.kh()), out(w, self.kw())) {
            (Some(oh), Some(ow)) if oh > 0 && ow > 0 => Ok((oh, ow)),
            _ => Err(LcsError::shape(format!(
                "{h}x{w} input too small for {}x{} kernel with padding {}",
                self.kh(),
                self.kw(),
                self.padding
            ))),
        }
    }
}

/// 2-D convolution with zero padding.
pub fn conv2d<T: Element>(input: &Tensor<T>, w: &ConvWeights<T>) -> Result<Tensor<T>> {
    conv_impl(input, w, None)
}

/// 2-D convolution whose padded border holds `border[c]` for input channel
/// `c` instead of zero.
///
/// Padding a feature map produced by a 1x1 convolution with that
/// convolution's bias is what makes a (1x1, kxk) chain exactly equal to a
/// single kxk convolution over the zero-padded original input.
pub fn conv2d_with_border<T: Element>(
    input: &Tensor<T>,
    w: &ConvWeights<T>,
    border: &[T],
) -> Result<Tensor<T>> {
    if border.len() != input.c() {
        return Err(LcsError::shape(format!(
            "{} border values for {} channels",
            border.len(),
            input.c()
        )));
    }
    conv_impl(input, w, Some(border))
}

fn conv_impl<T: Element>(
    input: &Tensor<T>,
    w: &ConvWeights<T>,
    border: Option<&[T]>,
) -> Result<Tensor<T>> {
    let [n, c, h, wd] = input.dims();
    if c != w.c_in() {
        return Err(LcsError::shape(format!(
            "input has {c} channels, kernel expects {}",
            w.c_in()
        )));
    }
    let (oh, ow) = w.output_hw(h, wd)?;
    let c_out = w.c_out();
    let mut out = Tensor::zeros([n, c_out, oh, ow]);
    let plane_out = oh * ow;
    for b in 0..n {
        let padded = pad_item(input, b, w.padding(), border);
        let out_item = &mut out.data_mut()[b * c_out * plane_out..(b + 1) * c_out * plane_out];
        if w.stride() == 1 {
            conv_item_stride1(&padded, w, oh, ow, out_item);
        } else {
            conv_item_generic(&padded, w, oh, ow, out_item);
        }
    }
    Ok(out)
}

/// One batch item with its padding materialised (borrowed when there is
/// no padding).
struct Padded<'a, T: Clone> {
    data: Cow<'a, [T]>,
    h: usize,
    w: usize,
}

impl<T: Element> Padded<'_, T> {
    #[inline]
    fn plane(&self, c: usize) -> &[T] {
        let hw = self.h * self.w;
        &self.data[c * hw..(c + 1) * hw]
    }
}

fn pad_item<'a, T: Element>(
    input: &'a Tensor<T>,
    b: usize,
    pad: usize,
    border: Option<&[T]>,
) -> Padded<'a, T> {
    let [_, c, h, w] = input.dims();
    if pad == 0 {
        let item = c * h * w;
        return Padded {
            data: Cow::Borrowed(&input.data()[b * item..(b + 1) * item]),
            h,
            w,
        };
    }
    let (ph, pw) = (h + 2 * pad, w + 2 * pad);
    let mut data = Vec::with_capacity(c * ph * pw);
    for ch in 0..c {
        let fill = border.map_or(T::zero(), |v| v[ch]);
        let src = input.plane(b, ch);
        data.extend(std::iter::repeat_n(fill, pad * pw));
        for row in src.chunks_exact(w) {
            data.extend(std::iter::repeat_n(fill, pad));
            data.extend_from_slice(row);
            data.extend(std::iter::repeat_n(fill, pad));
        }
        data.extend(std::iter::repeat_n(fill, pad * pw));
    }
    Padded {
        data: Cow::Owned(data),
        h: ph,
        w: pw,
    }
}

const OC_BLOCK: usize = 4;
const X_BLOCK: usize = 8;
/// Approximate bytes of input rows one band should touch, so every channel
/// block re-reads the band from cache rather than memory.
const BAND_BYTES: usize = 256 * 1024;

/// Output-channel block with its weights packed as `[tap][oc]`, taps
/// `(i, dy, dx)` ascending.
struct ChannelBlock<T> {
    o0: usize,
    len: usize,
    group: usize,
    packed: Vec<T>,
    bias: [T; OC_BLOCK],
}

/// Stride-1 path: the image is cut into bands of output rows; each band is
/// computed for every channel block while its input rows are hot, with a
/// register tile of `OC_BLOCK` output channels by up to 24 output columns.
fn conv_item_stride1<T: Element>(
    padded: &Padded<'_, T>,
    w: &ConvWeights<T>,
    oh: usize,
    ow: usize,
    out: &mut [T],
) {
    let [c_out, c_in_g, kh, kw] = w.dims();
    let c_out_g = c_out / w.groups();
    let plane = oh * ow;
    let taps = c_in_g * kh * kw;

    // Channel blocks never straddle a group boundary.
    let mut blocks = Vec::new();
    for g in 0..w.groups() {
        let mut o0 = g * c_out_g;
        while o0 < (g + 1) * c_out_g {
            let len = OC_BLOCK.min((g + 1) * c_out_g - o0);
            let mut packed = vec![T::zero(); taps * OC_BLOCK];
            for t in 0..taps {
                for j in 0..len {
                    packed[t * OC_BLOCK + j] = w.kernel()[(o0 + j) * taps + t];
                }
            }
            let mut bias = [T::zero(); OC_BLOCK];
            bias[..len].copy_from_slice(&w.bias()[o0..o0 + len]);
            blocks.push(ChannelBlock {
                o0,
                len,
                group: g,
                packed,
                bias,
            });
            o0 += len;
        }
    }

    let row_bytes = c_in_g * padded.w * std::mem::size_of::<T>();
    let band = (BAND_BYTES / row_bytes.max(1))
        .saturating_sub(kh - 1)
        .clamp(1, oh.max(1));
    let bands: Vec<(usize, usize)> = (0..oh)
        .step_by(band)
        .map(|y0| (y0, band.min(oh - y0)))
        .collect();
    let batch = 2 * rayon::current_num_threads();

    for group in bands.chunks(batch) {
        let results: Vec<Vec<T>> = group
            .par_iter()
            .map(|&(y0, rows)| {
                let mut buf = vec![T::zero(); c_out * rows * ow];
                for blk in &blocks {
                    let tile = Tile {
                        padded,
                        packed: &blk.packed,
                        bias: &blk.bias,
                        len: blk.len,
                        in_base: blk.group * c_in_g,
                        c_in_g,
                        kh,
                        kw,
                        y0,
                        oh: rows,
                        ow,
                    };
                    let dst = &mut buf[blk.o0 * rows * ow..(blk.o0 + blk.len) * rows * ow];
                    run_tile(&tile, dst);
                }
                buf
            })
            .collect();
        for (&(y0, rows), buf) in group.iter().zip(results) {
            for (o, src) in buf.chunks_exact(rows * ow).enumerate() {
                out[o * plane + y0 * ow..][..rows * ow].copy_from_slice(src);
            }
        }
    }
}

struct Tile<'a, T: Clone> {
    padded: &'a Padded<'a, T>,
    packed: &'a [T],
    bias: &'a [T; OC_BLOCK],
    len: usize,
    in_base: usize,
    c_in_g: usize,
    kh: usize,
    kw: usize,
    /// First output row of the band; `oh` rows are computed.
    y0: usize,
    oh: usize,
    ow: usize,
}

/// Stride-1 kernel selection. Every kernel produces bit-identical results;
/// forcing one exists so tests can cover paths the host would not pick.
#[doc(hidden)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum KernelPath {
    /// Widest instruction set the CPU supports.
    Auto = 0,
    /// AVX2 at most.
    Avx2 = 1,
    /// Portable code only.
    Portable = 2,
}

static KERNEL_CAP: AtomicU8 = AtomicU8::new(KernelPath::Auto as u8);

#[doc(hidden)]
pub fn force_kernel_path(path: KernelPath) {
    KERNEL_CAP.store(path as u8, Ordering::Relaxed);
}

fn run_tile<T: Element>(tile: &Tile<'_, T>, dst: &mut [T]) {
    #[cfg(target_arch = "x86_64")]
    {
        let cap = KERNEL_CAP.load(Ordering::Relaxed);
        if cap != KernelPath::Portable as u8 && std::is_x86_feature_detected!("avx2") {
            if std::any::TypeId::of::<T>() == std::any::TypeId::of::<f32>() {
                // SAFETY: T is f32, so the tile and destination reinterpret
                // without any change in layout; CPU features checked here.
                unsafe {
                    let tile = &*(tile as *const Tile<'_, T> as *const Tile<'_, f32>);
                    let dst =
                        std::slice::from_raw_parts_mut(dst.as_mut_ptr() as *mut f32, dst.len());
                    if cap == KernelPath::Auto as u8 && std::is_x86_feature_detected!("avx512f") {
                        avx512::tile_rows_f32(tile, dst);
                    } else {
                        avx2::tile_rows_f32(tile, dst);
                    }
                }
                return;
            }
            // SAFETY: the CPU supports AVX2, checked just above.
            unsafe { tile_rows_avx2(tile, dst) };
            return;
        }
    }
    tile_rows(tile, dst);
}

#[cfg(target_arch = "x86_64")]
#[target_feature(enable = "avx2")]
unsafe fn tile_rows_avx2<T: Element>(tile: &Tile<'_, T>, dst: &mut [T]) {
    tile_rows(tile, dst);
}

#[cfg(target_arch = "x86_64")]
mod avx2 {
    use std::arch::x86_64::*;

    use super::{Tile, OC_BLOCK};

    const WIDE: usize = 24;

    /// Same reduction order as `tile_rows`; products and sums stay separate
    /// instructions so the result is bitwise equal to the scalar path.
    #[target_feature(enable = "avx2")]
    pub(super) unsafe fn tile_rows_f32(tile: &Tile<'_, f32>, dst: &mut [f32]) {
        let plane = tile.oh * tile.ow;
        let pw = tile.padded.w;
        let taps = tile.c_in_g * tile.kh * tile.kw;
        assert!(tile.packed.len() >= taps * OC_BLOCK);
        assert!(dst.len() >= tile.len * plane);
        for y in 0..tile.oh {
            // Row starts of every (input channel, kernel row) pair for this y.
            let rows: Vec<*const f32> = (0..tile.c_in_g)
                .flat_map(|i| {
                    let src = tile.padded.plane(tile.in_base + i).as_ptr();
                    (0..tile.kh).map(move |dy| src.add((tile.y0 + y + dy) * pw))
                })
                .collect();
            let mut x0 = 0;
            while x0 + WIDE <= tile.ow {
                let mut acc = [[_mm256_setzero_ps(); 3]; OC_BLOCK];
                for (j, a) in acc.iter_mut().enumerate() {
                    let b = _mm256_set1_ps(tile.bias[j]);
                    *a = [b, b, b];
                }
                let mut wp = tile.packed.as_ptr();
                for &row in &rows {
                    for dx in 0..tile.kw {
                        let p = row.add(x0 + dx);
                        let v0 = _mm256_loadu_ps(p);
                        let v1 = _mm256_loadu_ps(p.add(8));
                        let v2 = _mm256_loadu_ps(p.add(16));
                        for (j, a) in acc.iter_mut().enumerate() {
                            let wj = _mm256_set1_ps(*wp.add(j));
                            a[0] = _mm256_add_ps(a[0], _mm256_mul_ps(wj, v0));
                            a[1] = _mm256_add_ps(a[1], _mm256_mul_ps(wj, v1));
                            a[2] = _mm256_add_ps(a[2], _mm256_mul_ps(wj, v2));
                        }
                        wp = wp.add(OC_BLOCK);
                    }
                }
                for (j, a) in acc.iter().enumerate().take(tile.len) {
                    let out = dst.as_mut_ptr().add(j * plane + y * tile.ow + x0);
                    _mm256_storeu_ps(out, a[0]);
                    _mm256_storeu_ps(out.add(8), a[1]);
                    _mm256_storeu_ps(out.add(16), a[2]);
                }
                x0 += WIDE;
            }
            while x0 + 8 <= tile.ow {
                let mut acc = [_mm256_setzero_ps(); OC_BLOCK];
                for (j, a) in acc.iter_mut().enumerate() {
                    *a = _mm256_set1_ps(tile.bias[j]);
                }
                let mut wp = tile.packed.as_ptr();
                for &row in &rows {
                    for dx in 0..tile.kw {
                        let v = _mm256_loadu_ps(row.add(x0 + dx));
                        for (j, a) in acc.iter_mut().enumerate() {
                            let wj = _mm256_set1_ps(*wp.add(j));
                            *a = _mm256_add_ps(*a, _mm256_mul_ps(wj, v));
                        }
                        wp = wp.add(OC_BLOCK);
                    }
                }
                for (j, a) in acc.iter().enumerate().take(tile.len) {
                    _mm256_storeu_ps(dst.as_mut_ptr().add(j * plane + y * tile.ow + x0), *a);
                }
                x0 += 8;
            }
            for x in x0..tile.ow {
                for j in 0..tile.len {
                    let mut acc = tile.bias[j];
                    let mut t = 0;
                    for &row in &rows {
                        for dx in 0..tile.kw {
                            acc += tile.packed[t * OC_BLOCK + j] * *row.add(x + dx);
                            t += 1;
                        }
                    }
                    dst[j * plane + y * tile.ow + x] = acc;
                }
            }
        }
    }
}

#[cfg(target_arch = "x86_64")]
mod avx512 {
    use std::arch::x86_64::*;

    use super::{Tile, OC_BLOCK};

    const VECS: usize = 4;
    const WIDE: usize = 16 * VECS;

    /// Same reduction order as `tile_rows` with 16-lane vectors; the ragged
    /// right edge uses masked loads and stores.
    #[target_feature(enable = "avx512f")]
    pub(super) unsafe fn tile_rows_f32(tile: &Tile<'_, f32>, dst: &mut [f32]) {
        let plane = tile.oh * tile.ow;
        let pw = tile.padded.w;
        let taps = tile.c_in_g * tile.kh * tile.kw;
        assert!(tile.packed.len() >= taps * OC_BLOCK);
        assert!(dst.len() >= tile.len * plane);
        let mut rows: Vec<*const f32> = Vec::with_capacity(tile.c_in_g * tile.kh);
        for y in 0..tile.oh {
            rows.clear();
            for i in 0..tile.c_in_g {
                let src = tile.padded.plane(tile.in_base + i).as_ptr();
                for dy in 0..tile.kh {
                    rows.push(src.add((tile.y0 + y + dy) * pw));
                }
            }
            let mut x0 = 0;
            while x0 + WIDE <= tile.ow {
                let mut acc = [[_mm512_setzero_ps(); VECS]; OC_BLOCK];
                for (j, a) in acc.iter_mut().enumerate() {
                    *a = [_mm512_set1_ps(tile.bias[j]); VECS];
                }
                let mut wp = tile.packed.as_ptr();
                for &row in &rows {
                    for dx in 0..tile.kw {
                        let p = row.add(x0 + dx);
                        let v = [
                            _mm512_loadu_ps(p),
                            _mm512_loadu_ps(p.add(16)),
                            _mm512_loadu_ps(p.add(32)),
                            _mm512_loadu_ps(p.add(48)),
                        ];
                        for (j, a) in acc.iter_mut().enumerate() {
                            let wj = _mm512_set1_ps(*wp.add(j));
                            for k in 0..VECS {
                                a[k] = _mm512_add_ps(a[k], _mm512_mul_ps(wj, v[k]));
                            }
                        }
                        wp = wp.add(OC_BLOCK);
                    }
                }
                for (j, a) in acc.iter().enumerate().take(tile.len) {
                    let out = dst.as_mut_ptr().add(j * plane + y * tile.ow + x0);
                    for (k, v) in a.iter().enumerate() {
                        _mm512_storeu_ps(out.add(16 * k), *v);
                    }
                }
                x0 += WIDE;
            }
            while x0 < tile.ow {
                let n = (tile.ow - x0).min(16);
                let mask: __mmask16 = if n == 16 { 0xffff } else { (1u16 << n) - 1 };
                let mut acc = [_mm512_setzero_ps(); OC_BLOCK];
                for (j, a) in acc.iter_mut().enumerate() {
                    *a = _mm512_set1_ps(tile.bias[j]);
                }
                let mut wp = tile.packed.as_ptr();
                for &row in &rows {
                    for dx in 0..tile.kw {
                        let v = _mm512_maskz_loadu_ps(mask, row.add(x0 + dx));
                        for (j, a) in acc.iter_mut().enumerate() {
                            let wj = _mm512_set1_ps(*wp.add(j));
                            *a = _mm512_add_ps(*a, _mm512_mul_ps(wj, v));
                        }
                        wp = wp.add(OC_BLOCK);
                    }
                }
                for (j, a) in acc.iter().enumerate().take(tile.len) {
                    _mm512_mask_storeu_ps(
                        dst.as_mut_ptr().add(j * plane + y * tile.ow + x0),
                        mask,
                        *a,
                    );
                }
                x0 += n;
            }
        }
    }
}

#[inline(always)]
fn tile_rows<T: Element>(tile: &Tile<'_, T>, dst: &mut [T]) {
    let Tile {
        padded,
        packed,
        bias,
        len,
        in_base,
        c_in_g,
        kh,
        kw,
        y0,
        oh,
        ow,
    } = *tile;
    let plane = oh * ow;
    for y in 0..oh {
        let mut x0 = 0;
        while x0 + X_BLOCK <= ow {
            let mut acc = [[T::zero(); X_BLOCK]; OC_BLOCK];
            for (j, row) in acc.iter_mut().enumerate() {
                *row = [bias[j]; X_BLOCK];
            }
            let mut t = 0;
            for i in 0..c_in_g {
                let src = padded.plane(in_base + i);
                for dy in 0..kh {
                    let row = &src[(y0 + y + dy) * padded.w + x0..];
                    for dx in 0..kw {
                        let wv: &[T; OC_BLOCK] =
                            packed[t * OC_BLOCK..(t + 1) * OC_BLOCK].try_into().unwrap();
                        let xs: &[T; X_BLOCK] = row[dx..dx + X_BLOCK].try_into().unwrap();
                        for j in 0..OC_BLOCK {
                            let wj = wv[j];
                            for k in 0..X_BLOCK {
                                acc[j][k] = acc[j][k] + wj * xs[k];
                            }
                        }
                        t += 1;
                    }
                }
            }
            for j in 0..len {
                dst[j * plane + y * ow + x0..][..X_BLOCK].copy_from_slice(&acc[j]);
            }
            x0 += X_BLOCK;
        }
        // Ragged right edge.
        for x in x0..ow {
            for j in 0..len {
                let mut acc = bias[j];
                let mut t = 0;
                for i in 0..c_in_g {
                    let src = padded.plane(in_base + i);
                    for dy in 0..kh {
                        let row = &src[(y0 + y + dy) * padded.w + x..];
                        for &v in &row[..kw] {
                            acc = acc + packed[t * OC_BLOCK + j] * v;
                            t += 1;
                        }
                    }
                }
                dst[j * plane + y * ow + x] = acc;
            }
        }
    }
}

/// Strided path. For each output row the taps `(i, dy, dx)` are gathered
/// into contiguous column vectors once, then every output channel sweeps
/// them in order, which keeps the per-element reduction order of the
/// reference while letting the inner loop vectorize.
fn conv_item_generic<T: Element>(
    padded: &Padded<'_, T>,
    w: &ConvWeights<T>,
    oh: usize,
    ow: usize,
    out: &mut [T],
) {
    let [c_out, c_in_g, kh, kw] = w.dims();
    let c_out_g = c_out / w.groups();
    let s = w.stride();
    let plane = oh * ow;
    let taps = c_in_g * kh * kw;
    let rows: Vec<usize> = (0..oh).collect();
    let batch = 8 * rayon::current_num_threads();
    for group in rows.chunks(batch) {
        let results: Vec<Vec<T>> = group
            .par_iter()
            .map(|&y| {
                let mut buf = vec![T::zero(); c_out * ow];
                let mut gathered = vec![T::zero(); taps * ow];
                for g in 0..w.groups() {
                    let mut t = 0;
                    for i in 0..c_in_g {
                        let src = padded.plane(g * c_in_g + i);
                        for dy in 0..kh {
                            let row = &src[(y * s + dy) * padded.w..];
                            for dx in 0..kw {
                                let dst = &mut gathered[t * ow..(t + 1) * ow];
                                for (x, d) in dst.iter_mut().enumerate() {
                                    *d = row[x * s + dx];
                                }
                                t += 1;
                            }
                        }
                    }
                    for o in g * c_out_g..(g + 1) * c_out_g {
                        let acc = &mut buf[o * ow..(o + 1) * ow];
                        acc.fill(w.bias()[o]);
                        let wk = &w.kernel()[o * taps..(o + 1) * taps];
                        for (t, &wt) in wk.iter().enumerate() {
                            for (a, &v) in acc.iter_mut().zip(&gathered[t * ow..(t + 1) * ow]) {
                                *a = *a + wt * v;
                            }
                        }
                    }
                }
                buf
            })
            .collect();
        for (&y, buf) in group.iter().zip(results) {
            for (o, src) in buf.chunks_exact(ow).enumerate() {
                out[o * plane + y * ow..][..ow].copy_from_slice(src);
            }
        }
    }
}
