//! `BCAS`: adapter-state checkpoints.
//!
//! Layout (little-endian): magic `BCAS`, `u16` version, `u16` flags (zero),
//! `u32` M, K, d, `f64` tau, temperature, `u64` n1, n2; then the bank
//! (`M x d` f32), the prior matrix (`M x K` f32), and `C1`, `C2` (`M` u64
//! each). States stored in `f64` are rounded to `f32` on save.

use std::path::Path;

use super::{read_file, write_file, Reader};
use crate::adapter::{AdapterConfig, AdapterState, ClassEmbeddingBank, CounterVector, PriorMatrix};
use crate::error::{Error, Result};
use crate::scalar::Scalar;

pub const STATE_MAGIC: [u8; 4] = *b"BCAS";
pub const STATE_VERSION: u16 = 1;
pub const STATE_HEADER_LEN: usize = 52;

/// Tolerance applied to bank row norms and prior row sums on load.
pub const LOAD_TOLERANCE: f64 = 1e-4;

/// Byte accounting of a checkpoint, section by section.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CheckpointLayout {
    pub header: usize,
    pub bank: usize,
    pub priors: usize,
    pub counters: usize,
}

impl CheckpointLayout {
    pub fn for_config(config: &AdapterConfig) -> Self {
        let m = config.num_embeddings;
        Self {
            header: STATE_HEADER_LEN,
            bank: m * config.dim * 4,
            priors: m * config.num_classes * 4,
            counters: 2 * m * 8,
        }
    }

    pub fn total(&self) -> usize {
        self.header + self.bank + self.priors + self.counters
    }
}

pub fn encode_state<T: Scalar>(state: &AdapterState<T>) -> Vec<u8> {
    let cfg = state.config();
    let mut out = Vec::with_capacity(CheckpointLayout::for_config(cfg).total());
    out.extend_from_slice(&STATE_MAGIC);
    out.extend_from_slice(&STATE_VERSION.to_le_bytes());
    out.extend_from_slice(&0u16.to_le_bytes());
    for v in [cfg.num_embeddings, cfg.num_classes, cfg.dim] {
        out.extend_from_slice(&(v as u32).to_le_bytes());
    }
    out.extend_from_slice(&cfg.tau.to_le_bytes());
    out.extend_from_slice(&cfg.temperature.to_le_bytes());
    out.extend_from_slice(&cfg.n1.to_le_bytes());
    out.extend_from_slice(&cfg.n2.to_le_bytes());
    for v in state.bank().as_flat().iter().chain(state.priors().as_flat()) {
        out.extend_from_slice(&v.to_f32_bits().to_le_bytes());
    }
    for c in state.c1().as_slice().iter().chain(state.c2().as_slice()) {
        out.extend_from_slice(&c.to_le_bytes());
    }
    out
}

/// Decode and validate a checkpoint. Format problems and invariant
/// violations are reported as different error kinds; nothing is repaired.
pub fn decode_state<T: Scalar>(bytes: &[u8]) -> Result<AdapterState<T>> {
    let mut r = Reader::new(bytes, 0);
    let magic = r.magic()?;
    if magic != STATE_MAGIC {
        return Err(Error::BadMagic { expected: STATE_MAGIC, found: magic });
    }
    let version = r.u16()?;
    if version != STATE_VERSION {
        return Err(Error::UnsupportedVersion(version));
    }
    let flags = r.u16()?;
    if flags != 0 {
        return Err(Error::Malformed(format!("unknown flag bits {flags:#06x}")));
    }
    let m = r.u32()? as usize;
    let k = r.u32()? as usize;
    let d = r.u32()? as usize;
    let tau = r.f64()?;
    let temperature = r.f64()?;
    let n1 = r.u64()?;
    let n2 = r.u64()?;
    let config = AdapterConfig { num_embeddings: m, num_classes: k, dim: d, tau, n1, n2, temperature };

    let expected = CheckpointLayout::for_config(&config).total() as u64;
    let actual = bytes.len() as u64;
    if actual < expected {
        return Err(Error::Truncated { offset: actual, needed: expected - actual });
    }
    if actual > expected {
        return Err(Error::Malformed(format!("{} trailing bytes after the counters", actual - expected)));
    }
    config.validate().map_err(|e| Error::InvariantViolation(format!("stored config: {e}")))?;

    let mut floats =
        |n: usize| -> Result<Vec<T>> { (0..n).map(|_| r.f32().map(|v| T::from_f64_round(v as f64))).collect() };
    let bank = floats(m * d)?;
    let priors = floats(m * k)?;
    let mut counters = |n: usize| -> Result<Vec<u64>> { (0..n).map(|_| r.u64()).collect() };
    let c1 = counters(m)?;
    let c2 = counters(m)?;

    let bank = ClassEmbeddingBank::from_flat(d, k, bank, LOAD_TOLERANCE)?;
    let priors = PriorMatrix::from_flat(k, priors, LOAD_TOLERANCE)?;
    AdapterState::from_parts(config, bank, priors, CounterVector::from_vec(c1), CounterVector::from_vec(c2))
}

pub fn save_state<T: Scalar>(path: impl AsRef<Path>, state: &AdapterState<T>) -> Result<()> {
    write_file(path.as_ref(), &encode_state(state))
}

pub fn load_state<T: Scalar>(path: impl AsRef<Path>) -> Result<AdapterState<T>> {
    decode_state(&read_file(path.as_ref())?)
}
