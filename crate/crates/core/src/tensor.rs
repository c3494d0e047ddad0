//! Rank-4 NCHW tensors.

use std::fmt::Debug;
use std::iter::Sum;

use num_traits::{Float, FromPrimitive, ToPrimitive};

use crate::error::{LcsError, Result};

/// Floating-point element type usable by every kernel in the crate.
///
/// Implemented for `f32` (the inference type) and `f64` (used by the
/// reparameterization merge and by high-precision reference forwards).
pub trait Element:
    Float + FromPrimitive + ToPrimitive + Default + Debug + Sum + Send + Sync + 'static
{
    fn from_f64_lossy(v: f64) -> Self;
}

impl Element for f32 {
    #[inline]
    fn from_f64_lossy(v: f64) -> Self {
        v as f32
    }
}

impl Element for f64 {
    #[inline]
    fn from_f64_lossy(v: f64) -> Self {
        v
    }
}

/// Dense `(n, c, h, w)` tensor stored row-major.
#[derive(Clone, PartialEq)]
pub struct Tensor<T = f32> {
    dims: [usize; 4],
    data: Vec<T>,
}

impl<T: Element> Tensor<T> {
    pub fn zeros(dims: [usize; 4]) -> Self {
        Self::full(dims, T::zero())
    }

    pub fn full(dims: [usize; 4], value: T) -> Self {
        Self {
            dims,
            data: vec![value; dims.iter().product()],
        }
    }

    pub fn from_vec(dims: [usize; 4], data: Vec<T>) -> Result<Self> {
        let expected: usize = dims.iter().product();
        if data.len() != expected {
            return Err(LcsError::shape(format!(
                "{} elements do not fill dims {:?} ({} expected)",
                data.len(),
                dims,
                expected
            )));
        }
        Ok(Self { dims, data })
    }

    pub fn from_fn(dims: [usize; 4], mut f: impl FnMut([usize; 4]) -> T) -> Self {
        let mut data = Vec::with_capacity(dims.iter().product());
        for n in 0..dims[0] {
            for c in 0..dims[1] {
                for y in 0..dims[2] {
                    for x in 0..dims[3] {
                        data.push(f([n, c, y, x]));
                    }
                }
            }
        }
        Self { dims, data }
    }

    #[inline]
    pub fn dims(&self) -> [usize; 4] {
        self.dims
    }

    #[inline]
    pub fn n(&self) -> usize {
        self.dims[0]
    }

    #[inline]
    pub fn c(&self) -> usize {
        self.dims[1]
    }

    #[inline]
    pub fn h(&self) -> usize {
        self.dims[2]
    }

    #[inline]
    pub fn w(&self) -> usize {
        self.dims[3]
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn data(&self) -> &[T] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [T] {
        &mut self.data
    }

    pub fn into_vec(self) -> Vec<T> {
        self.data
    }

    #[inline]
    pub fn offset(&self, [n, c, y, x]: [usize; 4]) -> usize {
        ((n * self.dims[1] + c) * self.dims[2] + y) * self.dims[3] + x
    }

    #[inline]
    pub fn get(&self, idx: [usize; 4]) -> T {
        self.data[self.offset(idx)]
    }

    #[inline]
    pub fn set(&mut self, idx: [usize; 4], v: T) {
        let o = self.offset(idx);
        self.data[o] = v;
    }

    /// One `(h, w)` plane.
    pub fn plane(&self, n: usize, c: usize) -> &[T] {
        let hw = self.dims[2] * self.dims[3];
        let start = (n * self.dims[1] + c) * hw;
        &self.data[start..start + hw]
    }

    pub fn map(&self, mut f: impl FnMut(T) -> T) -> Self {
        Self {
            dims: self.dims,
            data: self.data.iter().map(|&v| f(v)).collect(),
        }
    }

    pub fn cast<U: Element>(&self) -> Tensor<U> {
        Tensor {
            dims: self.dims,
            data: self
                .data
                .iter()
                .map(|v| U::from_f64_lossy(v.to_f64().unwrap_or(f64::NAN)))
                .collect(),
        }
    }

    pub fn max_abs_diff(&self, other: &Self) -> Result<f64> {
        check_same_dims(self, other)?;
        Ok(self
            .data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| (a.to_f64().unwrap() - b.to_f64().unwrap()).abs())
            .fold(0.0, f64::max))
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    /// Extracts batch item `n` as a batch of one.
    pub fn batch_item(&self, n: usize) -> Self {
        let per = self.dims[1] * self.dims[2] * self.dims[3];
        Self {
            dims: [1, self.dims[1], self.dims[2], self.dims[3]],
            data: self.data[n * per..(n + 1) * per].to_vec(),
        }
    }
}

impl<T: Element> Debug for Tensor<T> {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Tensor")
            .field("dims", &self.dims)
            .field("len", &self.data.len())
            .finish()
    }
}

pub(crate) fn check_same_dims<T: Element>(a: &Tensor<T>, b: &Tensor<T>) -> Result<()> {
    if a.dims != b.dims {
        return Err(LcsError::shape(format!(
            "dims {:?} and {:?} differ",
            a.dims, b.dims
        )));
    }
    Ok(())
}
