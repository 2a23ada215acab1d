#![allow(dead_code)]

pub mod experiments;

use bca::synthgen::SplitMix64;
use bca::{EmbeddingVector, Scalar};

/// Uniformly random unit vector.
pub fn random_unit<T: Scalar>(rng: &mut SplitMix64, dim: usize) -> EmbeddingVector<T> {
    let raw: Vec<f64> = (0..dim).map(|_| rng.normal()).collect();
    let n = raw.iter().map(|v| v * v).sum::<f64>().sqrt();
    EmbeddingVector::new(raw.iter().map(|v| T::from_f64_round(v / n)).collect()).expect("unit vector")
}

pub fn random_bank<T: Scalar>(rng: &mut SplitMix64, rows: usize, dim: usize) -> Vec<EmbeddingVector<T>> {
    (0..rows).map(|_| random_unit(rng, dim)).collect()
}

pub fn to_f64_rows<'a, T: Scalar>(rows: impl IntoIterator<Item = &'a [T]>) -> Vec<Vec<f64>> {
    rows.into_iter().map(|r| r.iter().map(|v| v.as_f64()).collect()).collect()
}

pub fn max_abs_diff(a: &[Vec<f64>], b: &[Vec<f64>]) -> f64 {
    a.iter().zip(b).flat_map(|(x, y)| x.iter().zip(y).map(|(p, q)| (p - q).abs())).fold(0.0, f64::max)
}
