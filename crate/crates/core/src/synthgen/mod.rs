//! Seeded synthetic embedding streams with controllable distribution shift,
//! and the brute-force oracles the adapter is tested against.

pub mod oracle;
mod rng;
mod stream;

pub use oracle::{oracle_posterior, oracle_replay, oracle_running_state, RecordedUpdate};
pub use rng::{mix64, SplitMix64};
pub use stream::{
    generate, make_class_means, make_text_embeddings, sample_generating_classes, sample_stream, LabeledEmbedding,
    ShiftModel, StreamSpec, SyntheticTask, DEFAULT_MIN_SEPARATION, UNLABELED,
};

#[cfg(test)]
mod tests;
