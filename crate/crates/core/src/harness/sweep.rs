use rayon::prelude::*;

use super::{encode_report_csv, run_stream, RunOptions, RunReport};
use crate::adapter::{AdapterConfig, AdapterState};
use crate::embedding::EmbeddingVector;
use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::synthgen::LabeledEmbedding;

/// Cartesian grid of adaptation hyperparameters.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepGrid {
    pub taus: Vec<f64>,
    pub n1s: Vec<u64>,
    pub n2s: Vec<u64>,
}

impl SweepGrid {
    pub fn len(&self) -> usize {
        self.taus.len() * self.n1s.len() * self.n2s.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Cells in row-major order: `tau` outermost, `n2` innermost.
    pub fn cells(&self) -> Vec<(f64, u64, u64)> {
        let mut out = Vec::with_capacity(self.len());
        for &tau in &self.taus {
            for &n1 in &self.n1s {
                for &n2 in &self.n2s {
                    out.push((tau, n1, n2));
                }
            }
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub tau: f64,
    pub n1: u64,
    pub n2: u64,
    pub report: RunReport,
}

/// One fresh run per grid cell over the same stream. Cells run in parallel;
/// rows come back in [`SweepGrid::cells`] order regardless of scheduling.
/// The first failing cell (in that order) is reported with its coordinates.
pub fn sweep<T: Scalar>(
    text_embeddings: &[EmbeddingVector<T>],
    stream: &[LabeledEmbedding<T>],
    base: AdapterConfig,
    grid: &SweepGrid,
    options: &RunOptions,
) -> Result<Vec<SweepRow>> {
    if grid.is_empty() {
        return Err(Error::InvalidConfig("sweep grid has no cells".into()));
    }
    grid.cells()
        .into_par_iter()
        .map(|(tau, n1, n2)| {
            let cell = || -> Result<RunReport> {
                let config = base.tau(tau).counts(n1, n2);
                let mut state = AdapterState::init(text_embeddings.to_vec(), config)?;
                run_stream(&mut state, stream, options)
            };
            cell().map(|report| SweepRow { tau, n1, n2, report }).map_err(|e| Error::SweepCell {
                tau,
                n1,
                n2,
                source: Box::new(e),
            })
        })
        .collect::<Vec<_>>()
        .into_iter()
        .collect()
}

pub fn encode_sweep_csv(rows: &[SweepRow]) -> Result<Vec<u8>> {
    encode_report_csv(rows.iter().map(|r| &r.report))
}
