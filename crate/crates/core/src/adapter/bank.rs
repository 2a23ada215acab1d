use crate::embedding::{norm, EmbeddingVector};
use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// The `M x d` matrix of class embeddings, stored row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct ClassEmbeddingBank<T> {
    dim: usize,
    num_classes: usize,
    data: Vec<T>,
}

impl<T: Scalar> ClassEmbeddingBank<T> {
    pub fn new(rows: Vec<EmbeddingVector<T>>, num_classes: usize) -> Result<Self> {
        let first = rows.first().ok_or(Error::EmptyInput)?;
        let dim = first.dim();
        let mut data = Vec::with_capacity(rows.len() * dim);
        for row in rows {
            if row.dim() != dim {
                return Err(Error::DimensionMismatch { expected: dim, got: row.dim() });
            }
            data.extend(row.into_inner());
        }
        Ok(Self { dim, num_classes, data })
    }

    /// Build from a flat row-major buffer, checking every row's norm against
    /// `tolerance`.
    pub fn from_flat(dim: usize, num_classes: usize, data: Vec<T>, tolerance: f64) -> Result<Self> {
        if dim == 0 || data.is_empty() || !data.len().is_multiple_of(dim) {
            return Err(Error::LengthMismatch { expected: dim, got: data.len() });
        }
        for (m, row) in data.chunks_exact(dim).enumerate() {
            if let Some(i) = row.iter().position(|v| !v.is_finite()) {
                return Err(Error::InvariantViolation(format!("class embedding {m} has a non-finite entry at {i}")));
            }
            let n = norm(row);
            if (n - 1.0).abs() > tolerance {
                return Err(Error::InvariantViolation(format!("class embedding {m} has norm {n}")));
            }
        }
        Ok(Self { dim, num_classes, data })
    }

    pub fn len(&self) -> usize {
        self.data.len() / self.dim
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn num_classes(&self) -> usize {
        self.num_classes
    }

    pub fn class_of(&self, m: usize) -> usize {
        m % self.num_classes
    }

    pub fn row(&self, m: usize) -> &[T] {
        &self.data[m * self.dim..(m + 1) * self.dim]
    }

    pub(crate) fn row_mut(&mut self, m: usize) -> &mut [T] {
        &mut self.data[m * self.dim..(m + 1) * self.dim]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[T]> {
        self.data.chunks_exact(self.dim)
    }

    pub fn as_flat(&self) -> &[T] {
        &self.data
    }
}

/// The `M x K` row-stochastic matrix whose row `m` is `P(Y | mu_m)`.
#[derive(Debug, Clone, PartialEq)]
pub struct PriorMatrix<T> {
    num_classes: usize,
    data: Vec<T>,
}

impl<T: Scalar> PriorMatrix<T> {
    /// Row `m` is one-hot at `m % num_classes`.
    pub fn one_hot(num_embeddings: usize, num_classes: usize) -> Self {
        let mut data = vec![T::zero(); num_embeddings * num_classes];
        for m in 0..num_embeddings {
            data[m * num_classes + m % num_classes] = T::one();
        }
        Self { num_classes, data }
    }

    pub fn from_flat(num_classes: usize, data: Vec<T>, tolerance: f64) -> Result<Self> {
        if num_classes == 0 || data.is_empty() || !data.len().is_multiple_of(num_classes) {
            return Err(Error::LengthMismatch { expected: num_classes, got: data.len() });
        }
        for (m, row) in data.chunks_exact(num_classes).enumerate() {
            let mut sum = 0.0;
            for (k, v) in row.iter().enumerate() {
                let v = v.as_f64();
                if !v.is_finite() || v < 0.0 {
                    return Err(Error::InvariantViolation(format!("prior row {m} has invalid entry {v} at class {k}")));
                }
                sum += v;
            }
            if (sum - 1.0).abs() > tolerance {
                return Err(Error::InvariantViolation(format!("prior row {m} sums to {sum}")));
            }
        }
        Ok(Self { num_classes, data })
    }

    pub fn len(&self) -> usize {
        self.data.len() / self.num_classes
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn num_classes(&self) -> usize {
        self.num_classes
    }

    pub fn row(&self, m: usize) -> &[T] {
        &self.data[m * self.num_classes..(m + 1) * self.num_classes]
    }

    pub(crate) fn row_mut(&mut self, m: usize) -> &mut [T] {
        &mut self.data[m * self.num_classes..(m + 1) * self.num_classes]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[T]> {
        self.data.chunks_exact(self.num_classes)
    }

    pub fn as_flat(&self) -> &[T] {
        &self.data
    }
}

/// Per-embedding update counters.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CounterVector(Vec<u64>);

impl CounterVector {
    pub fn filled(len: usize, value: u64) -> Self {
        Self(vec![value; len])
    }

    pub fn from_vec(counts: Vec<u64>) -> Self {
        Self(counts)
    }

    pub fn get(&self, m: usize) -> u64 {
        self.0[m]
    }

    pub(crate) fn increment(&mut self, m: usize) {
        self.0[m] += 1;
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_slice(&self) -> &[u64] {
        &self.0
    }
}
