//! On-disk formats: `BCAE` embedding files, `BCAS` checkpoints, and CSV
//! tables. All binary values are little-endian; floats are `f32`.

mod bcae;
mod checkpoint;
mod tables;

use std::path::Path;

pub use bcae::{
    decode_header, read_embeddings, write_embeddings, EmbeddingFile, EmbeddingFileHeader, EMBEDDING_HEADER_LEN,
    EMBEDDING_MAGIC, EMBEDDING_VERSION, FLAG_LABELS,
};
pub use checkpoint::{
    decode_state, encode_state, load_state, save_state, CheckpointLayout, LOAD_TOLERANCE, STATE_HEADER_LEN,
    STATE_MAGIC, STATE_VERSION,
};
pub use tables::{
    class_update_counts, decode_metrics_csv, encode_metrics_csv, encode_prior_csv, export_prior_csv, read_metrics_csv,
    top_classes, write_metrics_csv, MetricsRecord,
};

use crate::error::{Error, Result};

pub(crate) fn write_file(path: &Path, bytes: &[u8]) -> Result<()> {
    std::fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

pub(crate) fn read_file(path: &Path) -> Result<Vec<u8>> {
    std::fs::read(path).map_err(|e| Error::io(path, e))
}

/// Bounds-checked little-endian cursor.
pub(crate) struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    pub(crate) fn new(bytes: &'a [u8], pos: usize) -> Self {
        Self { bytes, pos }
    }

    pub(crate) fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self.pos + n;
        if end > self.bytes.len() {
            return Err(Error::Truncated { offset: self.bytes.len() as u64, needed: (end - self.bytes.len()) as u64 });
        }
        let out = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(out)
    }

    fn array<const N: usize>(&mut self) -> Result<[u8; N]> {
        Ok(self.take(N)?.try_into().expect("length checked"))
    }

    pub(crate) fn magic(&mut self) -> Result<[u8; 4]> {
        self.array()
    }

    pub(crate) fn u16(&mut self) -> Result<u16> {
        self.array().map(u16::from_le_bytes)
    }

    pub(crate) fn u32(&mut self) -> Result<u32> {
        self.array().map(u32::from_le_bytes)
    }

    pub(crate) fn i32(&mut self) -> Result<i32> {
        self.array().map(i32::from_le_bytes)
    }

    pub(crate) fn u64(&mut self) -> Result<u64> {
        self.array().map(u64::from_le_bytes)
    }

    pub(crate) fn f64(&mut self) -> Result<f64> {
        let offset = self.pos as u64;
        let v = f64::from_le_bytes(self.array()?);
        if !v.is_finite() {
            return Err(Error::NonFiniteFloat { offset });
        }
        Ok(v)
    }

    /// Reads an `f32`, rejecting NaN and infinities with their offset.
    pub(crate) fn f32(&mut self) -> Result<f32> {
        let offset = self.pos as u64;
        let v = f32::from_le_bytes(self.array()?);
        if !v.is_finite() {
            return Err(Error::NonFiniteFloat { offset });
        }
        Ok(v)
    }
}
