//! CSV outputs: per-sample metrics and the prior matrix.

use std::path::Path;

use serde::{Deserialize, Serialize};

use super::write_file;
use crate::adapter::AdapterState;
use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// One evaluated stream sample.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsRecord {
    pub index: usize,
    pub predicted: usize,
    pub label: i32,
    pub correct: bool,
    pub updated: bool,
    pub selected_index: usize,
    pub selected_prob: f64,
}

fn csv_err(e: csv::Error) -> Error {
    Error::Malformed(format!("csv: {e}"))
}

/// Serialize records with a header row. Output depends only on the records.
pub fn encode_metrics_csv(records: &[MetricsRecord]) -> Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for r in records {
        w.serialize(r).map_err(csv_err)?;
    }
    if records.is_empty() {
        w.write_record(["index", "predicted", "label", "correct", "updated", "selected_index", "selected_prob"])
            .map_err(csv_err)?;
    }
    w.into_inner().map_err(|e| Error::Malformed(format!("csv: {e}")))
}

pub fn decode_metrics_csv(bytes: &[u8]) -> Result<Vec<MetricsRecord>> {
    csv::Reader::from_reader(bytes).deserialize().map(|r| r.map_err(csv_err)).collect()
}

pub fn write_metrics_csv(path: impl AsRef<Path>, records: &[MetricsRecord]) -> Result<()> {
    write_file(path.as_ref(), &encode_metrics_csv(records)?)
}

pub fn read_metrics_csv(path: impl AsRef<Path>) -> Result<Vec<MetricsRecord>> {
    decode_metrics_csv(&super::read_file(path.as_ref())?)
}

/// Prior updates received per class: `sum over m with m % K == k of C2[m] - n2`.
pub fn class_update_counts<T: Scalar>(state: &AdapterState<T>) -> Vec<u64> {
    let cfg = state.config();
    let mut out = vec![0u64; cfg.num_classes];
    for (m, &c) in state.c2().as_slice().iter().enumerate() {
        out[cfg.class_of(m)] += c - cfg.n2;
    }
    out
}

/// The `top_n` classes with the most prior updates, ties to the lower index,
/// returned in ascending class order. `None` or `top_n >= K` selects all.
pub fn top_classes<T: Scalar>(state: &AdapterState<T>, top_n: Option<usize>) -> Vec<usize> {
    let k = state.config().num_classes;
    let Some(n) = top_n.filter(|&n| n < k) else {
        return (0..k).collect();
    };
    let counts = class_update_counts(state);
    let mut order: Vec<usize> = (0..k).collect();
    order.sort_by(|&a, &b| counts[b].cmp(&counts[a]).then(a.cmp(&b)));
    order.truncate(n);
    order.sort_unstable();
    order
}

/// Prior matrix as CSV. The header is `embedding` followed by the selected
/// class indices; one row per embedding whose class is selected. Values use
/// the shortest representation that reads back to the stored value.
pub fn encode_prior_csv<T: Scalar>(state: &AdapterState<T>, top_n: Option<usize>) -> Result<Vec<u8>> {
    let classes = top_classes(state, top_n);
    let cfg = state.config();
    let mut keep = vec![false; cfg.num_classes];
    for &k in &classes {
        keep[k] = true;
    }
    let mut w = csv::Writer::from_writer(Vec::new());
    let header = std::iter::once("embedding".to_string()).chain(classes.iter().map(|k| k.to_string()));
    w.write_record(header).map_err(csv_err)?;
    for (m, row) in state.priors().rows().enumerate() {
        if !keep[cfg.class_of(m)] {
            continue;
        }
        let cells = std::iter::once(m.to_string()).chain(classes.iter().map(|&k| row[k].to_string()));
        w.write_record(cells).map_err(csv_err)?;
    }
    w.into_inner().map_err(|e| Error::Malformed(format!("csv: {e}")))
}

pub fn export_prior_csv<T: Scalar>(
    state: &AdapterState<T>,
    path: impl AsRef<Path>,
    top_n: Option<usize>,
) -> Result<()> {
    write_file(path.as_ref(), &encode_prior_csv(state, top_n)?)
}
