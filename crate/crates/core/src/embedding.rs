//! Unit-norm embedding vectors and the dot/norm kernels shared by the adapter.

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Maximum accepted deviation of an input's L2 norm from 1.
///
/// Inputs outside this band are rejected rather than renormalized so that
/// upstream producer bugs surface instead of being hidden.
pub const INPUT_NORM_TOLERANCE: f64 = 1e-3;

/// A dense, finite, unit-L2-norm vector.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingVector<T> {
    values: Vec<T>,
}

impl<T: Scalar> EmbeddingVector<T> {
    /// Validate `values` as a unit-norm embedding. No renormalization happens.
    pub fn new(values: Vec<T>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::EmptyInput);
        }
        if let Some(index) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite { index });
        }
        let norm = norm(&values);
        if (norm - 1.0).abs() > INPUT_NORM_TOLERANCE {
            return Err(Error::NotUnitNorm { norm });
        }
        Ok(Self { values })
    }

    /// Scale `values` to unit norm. Fails on zero or non-finite input.
    pub fn normalize(values: Vec<T>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::EmptyInput);
        }
        if let Some(index) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite { index });
        }
        let n = norm(&values);
        if n < 1e-12 {
            return Err(Error::NotUnitNorm { norm: n });
        }
        let values = values.into_iter().map(|v| T::from_f64_round(v.as_f64() / n)).collect();
        Ok(Self { values })
    }

    pub fn from_f64(values: &[f64]) -> Result<Self> {
        Self::new(values.iter().map(|&v| T::from_f64_round(v)).collect())
    }

    pub(crate) fn from_raw_unchecked(values: Vec<T>) -> Self {
        Self { values }
    }

    pub fn dim(&self) -> usize {
        self.values.len()
    }

    pub fn as_slice(&self) -> &[T] {
        &self.values
    }

    pub fn into_inner(self) -> Vec<T> {
        self.values
    }

    pub fn to_f64_vec(&self) -> Vec<f64> {
        self.values.iter().map(|v| v.as_f64()).collect()
    }

    pub fn norm(&self) -> f64 {
        norm(&self.values)
    }
}

impl<T> AsRef<[T]> for EmbeddingVector<T> {
    fn as_ref(&self) -> &[T] {
        &self.values
    }
}

/// Dot product accumulated in `f64` with eight independent lanes.
///
/// The lane split is fixed, so results are reproducible for a given input.
#[inline]
pub fn dot<T: Scalar>(a: &[T], b: &[T]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    let mut lanes = [0.0f64; 8];
    let ca = a.chunks_exact(8);
    let cb = b.chunks_exact(8);
    let (ra, rb) = (ca.remainder(), cb.remainder());
    for (x, y) in ca.zip(cb) {
        for i in 0..8 {
            lanes[i] += x[i].as_f64() * y[i].as_f64();
        }
    }
    let mut tail = 0.0;
    for (x, y) in ra.iter().zip(rb) {
        tail += x.as_f64() * y.as_f64();
    }
    let quads = [lanes[0] + lanes[4], lanes[1] + lanes[5], lanes[2] + lanes[6], lanes[3] + lanes[7]];
    (quads[0] + quads[1]) + (quads[2] + quads[3]) + tail
}

pub fn norm<T: Scalar>(a: &[T]) -> f64 {
    dot(a, a).sqrt()
}
