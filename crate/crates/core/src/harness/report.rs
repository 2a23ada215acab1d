use std::fmt::Write as _;

use serde::Serialize;

use super::{AblationMode, PhaseClock, RunOptions};
use crate::adapter::{AdapterConfig, UpdateStrategy};
use crate::embio::MetricsRecord;
use crate::error::{Error, Result};

/// Seconds per phase: membership (t2), posterior mixing (t3), update
/// compute (t4-cal) and state write (t4-rw).
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize)]
pub struct PhaseTimings {
    pub membership: f64,
    pub posterior: f64,
    pub update_compute: f64,
    pub state_write: f64,
}

impl PhaseTimings {
    /// Means per step for t2/t3 and per fired update for t4.
    pub(crate) fn mean_of(clock: &PhaseClock) -> Self {
        let per = |total: f64, n: usize| if n == 0 { 0.0 } else { total / n as f64 };
        Self {
            membership: per(clock.membership, clock.steps),
            posterior: per(clock.posterior, clock.steps),
            update_compute: per(clock.update_compute, clock.updates),
            state_write: per(clock.state_write, clock.updates),
        }
    }
}

/// Accuracy bookkeeping derived from per-sample records alone.
#[derive(Debug, Clone, PartialEq)]
pub struct Summary {
    pub overall_accuracy: f64,
    /// Over record positions `>= ceil(n / 2)`; zero when that range is empty.
    pub last_half_accuracy: f64,
    /// `(first index of window, accuracy)`; the last window may be short.
    pub windowed_accuracy: Vec<(usize, f64)>,
    pub updates_fired: usize,
}

fn accuracy(records: &[MetricsRecord]) -> f64 {
    if records.is_empty() {
        return 0.0;
    }
    records.iter().filter(|r| r.correct).count() as f64 / records.len() as f64
}

pub fn summarize(records: &[MetricsRecord], window: usize) -> Summary {
    let window = window.max(1);
    Summary {
        overall_accuracy: accuracy(records),
        last_half_accuracy: accuracy(&records[records.len().div_ceil(2)..]),
        windowed_accuracy: records.chunks(window).map(|w| (w[0].index, accuracy(w))).collect(),
        updates_fired: records.iter().filter(|r| r.updated).count(),
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunReport {
    pub config: AdapterConfig,
    pub mode: AblationMode,
    pub strategy: UpdateStrategy,
    pub window: usize,
    /// Seed of the stream, when known to the caller.
    pub seed: Option<u64>,
    pub num_samples: usize,
    pub overall_accuracy: f64,
    pub last_half_accuracy: f64,
    pub windowed_accuracy: Vec<(usize, f64)>,
    pub updates_fired: usize,
    pub degenerate_updates: usize,
    pub phase_timings: Option<PhaseTimings>,
    pub records: Vec<MetricsRecord>,
}

impl RunReport {
    /// Summarize `records`, e.g. the concatenation of several resumed runs.
    pub fn new(
        config: AdapterConfig,
        options: RunOptions,
        records: Vec<MetricsRecord>,
        phase_timings: Option<PhaseTimings>,
        degenerate_updates: usize,
    ) -> Self {
        let s = summarize(&records, options.window);
        Self {
            config,
            mode: options.mode,
            strategy: options.strategy,
            window: options.window,
            seed: None,
            num_samples: records.len(),
            overall_accuracy: s.overall_accuracy,
            last_half_accuracy: s.last_half_accuracy,
            windowed_accuracy: s.windowed_accuracy,
            updates_fired: s.updates_fired,
            degenerate_updates,
            phase_timings,
            records,
        }
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = Some(seed);
        self
    }

    /// Stable `key=value` lines: effective configuration, then results.
    pub fn summary_text(&self) -> String {
        let c = &self.config;
        let mut out = String::new();
        let mut line = |k: &str, v: String| {
            let _ = writeln!(out, "{k}={v}");
        };
        line("mode", self.mode.to_string());
        line("strategy", strategy_name(&self.strategy));
        line("num_embeddings", c.num_embeddings.to_string());
        line("num_classes", c.num_classes.to_string());
        line("dim", c.dim.to_string());
        line("tau", c.tau.to_string());
        line("n1", c.n1.to_string());
        line("n2", c.n2.to_string());
        line("temperature", c.temperature.to_string());
        line("window", self.window.to_string());
        line("seed", self.seed.map_or("none".into(), |s| s.to_string()));
        line("samples", self.num_samples.to_string());
        line("overall_accuracy", self.overall_accuracy.to_string());
        line("last_half_accuracy", self.last_half_accuracy.to_string());
        line("updates_fired", self.updates_fired.to_string());
        line("degenerate_updates", self.degenerate_updates.to_string());
        if let Some(t) = &self.phase_timings {
            line("t2_membership_s", t.membership.to_string());
            line("t3_posterior_s", t.posterior.to_string());
            line("t4_cal_s", t.update_compute.to_string());
            line("t4_rw_s", t.state_write.to_string());
        }
        for (start, acc) in &self.windowed_accuracy {
            line(&format!("window_accuracy[{start}]"), acc.to_string());
        }
        out
    }
}

pub(crate) fn strategy_name(s: &UpdateStrategy) -> String {
    match s {
        UpdateStrategy::CountBased => "count".into(),
        UpdateStrategy::Momentum { alpha } => format!("momentum:{alpha}"),
    }
}

/// Flat row shared by report and sweep tables.
#[derive(Serialize)]
pub(crate) struct ReportRow {
    mode: &'static str,
    strategy: String,
    num_embeddings: usize,
    num_classes: usize,
    dim: usize,
    tau: f64,
    n1: u64,
    n2: u64,
    temperature: f64,
    seed: Option<u64>,
    samples: usize,
    overall_accuracy: f64,
    last_half_accuracy: f64,
    updates_fired: usize,
    degenerate_updates: usize,
    t2_membership_s: Option<f64>,
    t3_posterior_s: Option<f64>,
    t4_cal_s: Option<f64>,
    t4_rw_s: Option<f64>,
}

impl From<&RunReport> for ReportRow {
    fn from(r: &RunReport) -> Self {
        let t = r.phase_timings;
        Self {
            mode: r.mode.name(),
            strategy: strategy_name(&r.strategy),
            num_embeddings: r.config.num_embeddings,
            num_classes: r.config.num_classes,
            dim: r.config.dim,
            tau: r.config.tau,
            n1: r.config.n1,
            n2: r.config.n2,
            temperature: r.config.temperature,
            seed: r.seed,
            samples: r.num_samples,
            overall_accuracy: r.overall_accuracy,
            last_half_accuracy: r.last_half_accuracy,
            updates_fired: r.updates_fired,
            degenerate_updates: r.degenerate_updates,
            t2_membership_s: t.map(|t| t.membership),
            t3_posterior_s: t.map(|t| t.posterior),
            t4_cal_s: t.map(|t| t.update_compute),
            t4_rw_s: t.map(|t| t.state_write),
        }
    }
}

/// One CSV row per report, with a header.
pub fn encode_report_csv<'a>(reports: impl IntoIterator<Item = &'a RunReport>) -> Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for r in reports {
        w.serialize(ReportRow::from(r)).map_err(|e| Error::Malformed(format!("csv: {e}")))?;
    }
    w.into_inner().map_err(|e| Error::Malformed(format!("csv: {e}")))
}
