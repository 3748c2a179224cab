//! Rank-4 `(n, c, h, w)` tensors over `f32` or `f64`.
//!
//! Every network primitive is generic over [`Element`]; the `f64`
//! instantiation is the high-precision mode used to tighten gradient checks.

use std::fmt::Debug;
use std::iter::Sum;
use std::ops::{AddAssign, MulAssign, SubAssign};

use num_traits::{Float, FromPrimitive, ToPrimitive};

use crate::error::{Error, Result};

pub trait Element:
    Float + FromPrimitive + ToPrimitive + AddAssign + SubAssign + MulAssign + Sum + Debug + Default + Send + Sync + 'static
{
    #[inline]
    fn from_f64_lossy(v: f64) -> Self {
        Self::from_f64(v).expect("f64 converts to every Element")
    }

    #[inline]
    fn to_f64_lossy(self) -> f64 {
        self.to_f64().expect("Element converts to f64")
    }
}

impl Element for f32 {}
impl Element for f64 {}

#[derive(Debug, Clone, PartialEq)]
pub struct Tensor4<T = f32> {
    shape: [usize; 4],
    data: Vec<T>,
}

impl<T: Element> Tensor4<T> {
    pub fn zeros(shape: [usize; 4]) -> Self {
        Self { shape, data: vec![T::zero(); shape.iter().product()] }
    }

    pub fn full(shape: [usize; 4], value: T) -> Self {
        Self { shape, data: vec![value; shape.iter().product()] }
    }

    pub fn from_vec(shape: [usize; 4], data: Vec<T>) -> Result<Self> {
        if data.len() != shape.iter().product::<usize>() {
            return Err(Error::ShapeMismatch(format!("{} values for shape {shape:?}", data.len())));
        }
        Ok(Self { shape, data })
    }

    pub fn shape(&self) -> [usize; 4] {
        self.shape
    }

    pub fn n(&self) -> usize {
        self.shape[0]
    }

    pub fn c(&self) -> usize {
        self.shape[1]
    }

    pub fn h(&self) -> usize {
        self.shape[2]
    }

    pub fn w(&self) -> usize {
        self.shape[3]
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

    pub fn into_data(self) -> Vec<T> {
        self.data
    }

    #[inline]
    pub fn index(&self, n: usize, c: usize, y: usize, x: usize) -> usize {
        ((n * self.shape[1] + c) * self.shape[2] + y) * self.shape[3] + x
    }

    #[inline]
    pub fn get(&self, n: usize, c: usize, y: usize, x: usize) -> T {
        self.data[self.index(n, c, y, x)]
    }

    /// The `h × w` plane at `(n, c)`.
    #[inline]
    pub fn plane(&self, n: usize, c: usize) -> &[T] {
        let sz = self.shape[2] * self.shape[3];
        let start = (n * self.shape[1] + c) * sz;
        &self.data[start..start + sz]
    }

    #[inline]
    pub fn plane_mut(&mut self, n: usize, c: usize) -> &mut [T] {
        let sz = self.shape[2] * self.shape[3];
        let start = (n * self.shape[1] + c) * sz;
        &mut self.data[start..start + sz]
    }

    pub fn sum(&self) -> T {
        self.data.iter().copied().sum()
    }

    pub fn map(&self, f: impl Fn(T) -> T) -> Self {
        Self { shape: self.shape, data: self.data.iter().map(|&v| f(v)).collect() }
    }

    pub fn cast<U: Element>(&self) -> Tensor4<U> {
        Tensor4 { shape: self.shape, data: self.data.iter().map(|v| U::from_f64_lossy(v.to_f64_lossy())).collect() }
    }

    /// Errors with [`Error::NonFiniteValue`] tagged by `op` if any element is NaN or infinite.
    pub fn ensure_finite(&self, op: &'static str) -> Result<()> {
        if self.data.iter().all(|v| v.is_finite()) {
            Ok(())
        } else {
            Err(Error::NonFiniteValue(op))
        }
    }

    pub fn same_shape(&self, other: &Self, what: &str) -> Result<()> {
        if self.shape != other.shape {
            return Err(Error::ShapeMismatch(format!("{what}: {:?} vs {:?}", self.shape, other.shape)));
        }
        Ok(())
    }

    pub fn add_assign(&mut self, other: &Self) -> Result<()> {
        self.same_shape(other, "add")?;
        for (a, &b) in self.data.iter_mut().zip(&other.data) {
            *a += b;
        }
        Ok(())
    }

    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        self.data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| (a.to_f64_lossy() - b.to_f64_lossy()).abs())
            .fold(0.0, f64::max)
    }
}
