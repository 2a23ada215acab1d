//! `BCAE`: flat files of `f32` embeddings, optionally labeled.
//!
//! Layout (little-endian):
//!
//! | offset | size | field                                   |
//! |--------|------|-----------------------------------------|
//! | 0      | 4    | magic `BCAE`                            |
//! | 4      | 2    | version (`1`)                           |
//! | 6      | 2    | flags; bit 0 set when labels are present |
//! | 8      | 4    | `d`                                     |
//! | 12     | 4    | `K`                                     |
//! | 16     | 8    | record count                            |
//! | 24     | 8    | reserved, zero                          |
//!
//! Each record is `d` `f32` values followed, when labeled, by an `i32`
//! label in `[-1, K)` where `-1` means unlabeled.

use std::path::Path;

use super::{read_file, write_file, Reader};
use crate::embedding::EmbeddingVector;
use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::synthgen::{LabeledEmbedding, UNLABELED};

pub const EMBEDDING_MAGIC: [u8; 4] = *b"BCAE";
pub const EMBEDDING_VERSION: u16 = 1;
pub const EMBEDDING_HEADER_LEN: usize = 32;
pub const FLAG_LABELS: u16 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct EmbeddingFileHeader {
    pub version: u16,
    pub labeled: bool,
    pub dim: u32,
    pub num_classes: u32,
    pub count: u64,
}

impl EmbeddingFileHeader {
    pub fn record_len(&self) -> usize {
        self.dim as usize * 4 + if self.labeled { 4 } else { 0 }
    }

    /// Total file size implied by the header.
    pub fn file_len(&self) -> u64 {
        EMBEDDING_HEADER_LEN as u64 + self.count * self.record_len() as u64
    }
}

/// Decoded contents of a `BCAE` file. Values are kept exactly as stored.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingFile {
    pub header: EmbeddingFileHeader,
    /// Row-major `count x d`.
    pub values: Vec<f32>,
    /// One entry per record when the header is labeled, empty otherwise.
    pub labels: Vec<i32>,
}

impl EmbeddingFile {
    /// Build a file body, checking shapes and label range.
    pub fn new(dim: usize, num_classes: usize, values: Vec<f32>, labels: Option<Vec<i32>>) -> Result<Self> {
        if dim == 0 || values.is_empty() || !values.len().is_multiple_of(dim) {
            return Err(Error::LengthMismatch { expected: dim, got: values.len() });
        }
        let count = values.len() / dim;
        if let Some(labels) = &labels {
            if labels.len() != count {
                return Err(Error::LengthMismatch { expected: count, got: labels.len() });
            }
            check_labels(labels, num_classes)?;
        }
        let header = EmbeddingFileHeader {
            version: EMBEDDING_VERSION,
            labeled: labels.is_some(),
            dim: to_u32(dim, "d")?,
            num_classes: to_u32(num_classes, "K")?,
            count: count as u64,
        };
        Ok(Self { header, values, labels: labels.unwrap_or_default() })
    }

    /// A labeled stream file.
    pub fn from_stream<T: Scalar>(stream: &[LabeledEmbedding<T>], num_classes: usize) -> Result<Self> {
        let first = stream.first().ok_or(Error::EmptyInput)?;
        let dim = first.embedding.dim();
        let mut values = Vec::with_capacity(stream.len() * dim);
        for s in stream {
            push_row(&mut values, s.embedding.as_slice(), dim)?;
        }
        let labels = stream.iter().map(|s| s.label).collect();
        Self::new(dim, num_classes, values, Some(labels))
    }

    /// An unlabeled text-embedding bank; row `m` belongs to class `m % K`.
    pub fn from_bank<T: Scalar>(rows: &[EmbeddingVector<T>], num_classes: usize) -> Result<Self> {
        let first = rows.first().ok_or(Error::EmptyInput)?;
        let dim = first.dim();
        let mut values = Vec::with_capacity(rows.len() * dim);
        for r in rows {
            push_row(&mut values, r.as_slice(), dim)?;
        }
        Self::new(dim, num_classes, values, None)
    }

    pub fn len(&self) -> usize {
        self.header.count as usize
    }

    pub fn is_empty(&self) -> bool {
        self.header.count == 0
    }

    pub fn dim(&self) -> usize {
        self.header.dim as usize
    }

    pub fn num_classes(&self) -> usize {
        self.header.num_classes as usize
    }

    pub fn row(&self, i: usize) -> &[f32] {
        let d = self.dim();
        &self.values[i * d..(i + 1) * d]
    }

    pub fn label(&self, i: usize) -> i32 {
        self.labels.get(i).copied().unwrap_or(UNLABELED)
    }

    /// Rows as validated unit-norm embeddings (norm tolerance as for any
    /// adapter input). Fails on the first offending row.
    pub fn embeddings<T: Scalar>(&self) -> Result<Vec<EmbeddingVector<T>>> {
        (0..self.len())
            .map(|i| {
                let v = self.row(i).iter().map(|&x| T::from_f64_round(x as f64)).collect();
                EmbeddingVector::new(v).map_err(|e| Error::Malformed(format!("record {i}: {e}")))
            })
            .collect()
    }

    /// Rows with their labels (`-1` throughout for an unlabeled file).
    pub fn stream<T: Scalar>(&self) -> Result<Vec<LabeledEmbedding<T>>> {
        Ok(self.embeddings()?.into_iter().enumerate().map(|(i, e)| LabeledEmbedding::new(e, self.label(i))).collect())
    }

    pub fn encode(&self) -> Vec<u8> {
        let h = &self.header;
        let mut out = Vec::with_capacity(h.file_len() as usize);
        out.extend_from_slice(&EMBEDDING_MAGIC);
        out.extend_from_slice(&h.version.to_le_bytes());
        out.extend_from_slice(&(if h.labeled { FLAG_LABELS } else { 0 }).to_le_bytes());
        out.extend_from_slice(&h.dim.to_le_bytes());
        out.extend_from_slice(&h.num_classes.to_le_bytes());
        out.extend_from_slice(&h.count.to_le_bytes());
        out.extend_from_slice(&[0u8; 8]);
        for i in 0..self.len() {
            for v in self.row(i) {
                out.extend_from_slice(&v.to_le_bytes());
            }
            if h.labeled {
                out.extend_from_slice(&self.labels[i].to_le_bytes());
            }
        }
        out
    }

    pub fn decode(bytes: &[u8]) -> Result<Self> {
        let header = decode_header(bytes)?;
        let expected = header.file_len();
        let actual = bytes.len() as u64;
        if actual < expected {
            return Err(Error::Truncated { offset: actual, needed: expected - actual });
        }
        if actual > expected {
            return Err(Error::Malformed(format!("{} trailing bytes after the last record", actual - expected)));
        }
        let d = header.dim as usize;
        let n = header.count as usize;
        let mut r = Reader::new(bytes, EMBEDDING_HEADER_LEN);
        let mut values = Vec::with_capacity(n * d);
        let mut labels = Vec::with_capacity(if header.labeled { n } else { 0 });
        for _ in 0..n {
            for _ in 0..d {
                values.push(r.f32()?);
            }
            if header.labeled {
                labels.push(r.i32()?);
            }
        }
        check_labels(&labels, header.num_classes as usize)?;
        Ok(Self { header, values, labels })
    }
}

/// Parse and validate the 32-byte header alone.
pub fn decode_header(bytes: &[u8]) -> Result<EmbeddingFileHeader> {
    let mut r = Reader::new(bytes, 0);
    let magic = r.magic()?;
    if magic != EMBEDDING_MAGIC {
        return Err(Error::BadMagic { expected: EMBEDDING_MAGIC, found: magic });
    }
    let version = r.u16()?;
    if version != EMBEDDING_VERSION {
        return Err(Error::UnsupportedVersion(version));
    }
    let flags = r.u16()?;
    if flags & !FLAG_LABELS != 0 {
        return Err(Error::Malformed(format!("unknown flag bits {flags:#06x}")));
    }
    let dim = r.u32()?;
    let num_classes = r.u32()?;
    let count = r.u64()?;
    if r.take(8)?.iter().any(|&b| b != 0) {
        return Err(Error::Malformed("reserved header bytes are not zero".into()));
    }
    if dim == 0 || count == 0 {
        return Err(Error::Malformed(format!("d = {dim} and count = {count} must both be positive")));
    }
    Ok(EmbeddingFileHeader { version, labeled: flags & FLAG_LABELS != 0, dim, num_classes, count })
}

fn check_labels(labels: &[i32], num_classes: usize) -> Result<()> {
    for (i, &l) in labels.iter().enumerate() {
        if l < UNLABELED || (l >= 0 && l as usize >= num_classes) {
            return Err(Error::Malformed(format!("record {i} has label {l} outside [-1, {num_classes})")));
        }
    }
    Ok(())
}

fn push_row<T: Scalar>(out: &mut Vec<f32>, row: &[T], dim: usize) -> Result<()> {
    if row.len() != dim {
        return Err(Error::DimensionMismatch { expected: dim, got: row.len() });
    }
    out.extend(row.iter().map(|v| f32::from_bits(v.to_f32_bits())));
    Ok(())
}

fn to_u32(v: usize, what: &str) -> Result<u32> {
    u32::try_from(v).map_err(|_| Error::InvalidConfig(format!("{what} = {v} does not fit in 32 bits")))
}

pub fn write_embeddings(path: impl AsRef<Path>, file: &EmbeddingFile) -> Result<()> {
    write_file(path.as_ref(), &file.encode())
}

pub fn read_embeddings(path: impl AsRef<Path>) -> Result<EmbeddingFile> {
    EmbeddingFile::decode(&read_file(path.as_ref())?)
}
