//! Streaming Bayesian class adaptation for zero-shot embedding classifiers.
//!
//! An [`AdapterState`] holds a bank of `M` unit-norm class embeddings, one
//! class-probability row per embedding, and two visit counters. Each arriving
//! embedding is scored against the bank, mixed through the prior rows into a
//! class posterior, and, when the best-matching embedding is confident enough,
//! both that embedding and its prior row are folded toward the new evidence by
//! count-weighted running means.
//!
//! Storage is generic over [`Scalar`] (`f32` or `f64`); all arithmetic is
//! carried out in `f64`. The `*32` / `*64` aliases below name the two common
//! instantiations. On-disk formats are always little-endian `f32`.
//!
//! Module map:
//! - [`adapter`]: state, scoring, posterior mixing and the adaptation step.
//! - [`synthgen`]: seeded synthetic streams with controllable shift, plus
//!   brute-force reference oracles.
//! - [`embio`]: the `BCAE` embedding format, `BCAS` checkpoints and CSV outputs.
//! - [`harness`]: streaming evaluation, ablations, sweeps and phase timing.

pub mod adapter;
pub mod embedding;
pub mod embio;
mod error;
pub mod harness;
mod scalar;
pub mod synthgen;

pub use adapter::{
    frozen_posterior, posterior_from_membership, select, AdapterConfig, AdapterState, ClassEmbeddingBank,
    CounterVector, Preset, PriorMatrix, StepOutcome, StepWarning, UpdatePolicy, UpdateStrategy,
};
pub use embedding::EmbeddingVector;
pub use error::{Error, ErrorKind, Result};
pub use scalar::Scalar;

pub type AdapterState32 = AdapterState<f32>;
pub type AdapterState64 = AdapterState<f64>;
pub type EmbeddingVector32 = EmbeddingVector<f32>;
pub type EmbeddingVector64 = EmbeddingVector<f64>;
pub type LabeledEmbedding32 = synthgen::LabeledEmbedding<f32>;
pub type LabeledEmbedding64 = synthgen::LabeledEmbedding<f64>;
