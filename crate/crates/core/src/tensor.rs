//! Dense row-major tensors, channels-last.
//!
//! Image data is laid out `[batch, height, width, channel]`, 1-D signals
//! `[batch, length, channel]`.

use std::ops::Range;

use crate::error::{shape_err, Result};
use crate::scalar::{Real, Scalar};

#[derive(Clone, Debug, PartialEq)]
pub struct Tensor<T> {
    shape: Vec<usize>,
    data: Vec<T>,
}

impl<T: Scalar> Tensor<T> {
    pub fn new(shape: impl Into<Vec<usize>>, data: Vec<T>) -> Result<Self> {
        let shape = shape.into();
        let numel: usize = shape.iter().product();
        if numel != data.len() {
            return Err(shape_err!(
                "shape {:?} holds {} values, got {}",
                shape,
                numel,
                data.len()
            ));
        }
        Ok(Self { shape, data })
    }

    pub fn full(shape: impl Into<Vec<usize>>, value: T) -> Self {
        let shape = shape.into();
        let numel = shape.iter().product();
        Self {
            shape,
            data: vec![value; numel],
        }
    }

    pub fn zeros(shape: impl Into<Vec<usize>>) -> Self {
        Self::full(shape, T::zero())
    }

    pub fn ones(shape: impl Into<Vec<usize>>) -> Self {
        Self::full(shape, T::one())
    }

    /// Rank-0 tensor.
    pub fn scalar(value: T) -> Self {
        Self {
            shape: Vec::new(),
            data: vec![value],
        }
    }

    pub fn from_fn(shape: impl Into<Vec<usize>>, f: impl FnMut(usize) -> T) -> Self {
        let shape = shape.into();
        let numel: usize = shape.iter().product();
        Self {
            shape,
            data: (0..numel).map(f).collect(),
        }
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn rank(&self) -> usize {
        self.shape.len()
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

    /// Extent of the trailing (channel) axis.
    pub fn channels(&self) -> usize {
        self.shape.last().copied().unwrap_or(1)
    }

    /// The single value of a one-element tensor.
    pub fn item(&self) -> Result<T> {
        match self.data.as_slice() {
            [v] => Ok(*v),
            _ => Err(shape_err!(
                "item() on tensor of shape {:?}",
                self.shape
            )),
        }
    }

    pub fn reshape(self, shape: impl Into<Vec<usize>>) -> Result<Self> {
        Self::new(shape, self.data)
    }

    pub fn map(&self, f: impl Fn(T) -> T) -> Self {
        Self {
            shape: self.shape.clone(),
            data: self.data.iter().map(|&v| f(v)).collect(),
        }
    }

    /// Row-major offset of a multi-index.
    pub fn offset(&self, index: &[usize]) -> usize {
        debug_assert_eq!(index.len(), self.shape.len());
        index
            .iter()
            .zip(&self.shape)
            .fold(0, |acc, (&i, &n)| acc * n + i)
    }

    pub fn at(&self, index: &[usize]) -> T {
        self.data[self.offset(index)]
    }

    /// Gathers entries of the leading axis, in the given order.
    pub fn select(&self, rows: &[usize]) -> Result<Self> {
        let lead = *self
            .shape
            .first()
            .ok_or_else(|| shape_err!("select on a rank-0 tensor"))?;
        let stride = self.data.len() / lead.max(1);
        let mut data = Vec::with_capacity(rows.len() * stride);
        for &r in rows {
            if r >= lead {
                return Err(shape_err!("row {r} out of range for leading extent {lead}"));
            }
            data.extend_from_slice(&self.data[r * stride..(r + 1) * stride]);
        }
        let mut shape = self.shape.clone();
        shape[0] = rows.len();
        Ok(Self { shape, data })
    }

    /// Copies the channel range `range` of the trailing axis.
    pub fn slice_channels(&self, range: Range<usize>) -> Result<Self> {
        let c = self.channels();
        if range.start > range.end || range.end > c || self.rank() == 0 {
            return Err(shape_err!("channel range {range:?} out of 0..{c}"));
        }
        let width = range.end - range.start;
        let mut data = Vec::with_capacity(self.data.len() / c.max(1) * width);
        for px in self.data.chunks_exact(c) {
            data.extend_from_slice(&px[range.clone()]);
        }
        let mut shape = self.shape.clone();
        *shape.last_mut().unwrap() = width;
        Ok(Self { shape, data })
    }

    /// Concatenates tensors along the leading axis.
    pub fn stack(parts: &[Self]) -> Result<Self> {
        let first = parts
            .first()
            .ok_or_else(|| shape_err!("stack of zero tensors"))?;
        let tail = &first.shape[1..];
        let mut lead = 0;
        let mut data = Vec::new();
        for p in parts {
            if p.rank() == 0 || &p.shape[1..] != tail {
                return Err(shape_err!(
                    "cannot stack {:?} onto {:?}",
                    p.shape,
                    first.shape
                ));
            }
            lead += p.shape[0];
            data.extend_from_slice(&p.data);
        }
        let mut shape = first.shape.clone();
        shape[0] = lead;
        Ok(Self { shape, data })
    }

    pub fn max_abs_diff(&self, other: &Self) -> Result<T> {
        if self.shape != other.shape {
            return Err(shape_err!(
                "compare {:?} with {:?}",
                self.shape,
                other.shape
            ));
        }
        Ok(self
            .data
            .iter()
            .zip(&other.data)
            .map(|(&a, &b)| a.abs_diff(b))
            .fold(T::zero(), |m, d| if d > m { d } else { m }))
    }

    pub fn sum(&self) -> T {
        self.data.iter().fold(T::zero(), |acc, &v| acc + v)
    }
}

impl<T: Real> Tensor<T> {
    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    pub fn from_f64(shape: impl Into<Vec<usize>>, values: &[f64]) -> Result<Self> {
        Self::new(shape, values.iter().map(|&v| T::from_f64(v)).collect())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn numel_must_match() {
        assert!(Tensor::<f64>::new([2, 3], vec![0.0; 5]).is_err());
        let t = Tensor::<f64>::new([2, 3], vec![0.0; 6]).unwrap();
        assert_eq!(t.len(), 6);
        assert_eq!(Tensor::<f64>::scalar(3.0).item().unwrap(), 3.0);
    }

    #[test]
    fn slice_and_select() {
        let t = Tensor::<f64>::from_fn([2, 2, 3], |i| i as f64);
        let s = t.slice_channels(1..3).unwrap();
        assert_eq!(s.shape(), &[2, 2, 2]);
        assert_eq!(s.data()[..4], [1.0, 2.0, 4.0, 5.0]);
        let r = t.select(&[1, 0]).unwrap();
        assert_eq!(r.data()[0], 6.0);
        assert_eq!(r.data()[6], 0.0);
        assert!(t.select(&[2]).is_err());
        assert_eq!(t.at(&[1, 0, 2]), 8.0);
    }
}
