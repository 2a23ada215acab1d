//! Streaming evaluation: one stream through one adapter under an ablation
//! mode, with per-sample records, accuracy summaries and phase timings.

mod report;
mod sweep;
mod timing;

use std::fmt;
use std::str::FromStr;
use std::time::Instant;

use serde::{Deserialize, Serialize};

pub use report::{encode_report_csv, summarize, PhaseTimings, RunReport, Summary};
pub use sweep::{encode_sweep_csv, sweep, SweepGrid, SweepRow};
pub use timing::{time_phases, PhaseMedians};

use crate::adapter::{aggregate_by_class, mix_raw, select, AdapterState, UpdatePolicy, UpdateStrategy};
use crate::embio::MetricsRecord;
use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::synthgen::LabeledEmbedding;

pub const DEFAULT_WINDOW: usize = 500;

/// Which halves of the adaptation are active for a run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AblationMode {
    /// No updates; predictions are the class-aggregated membership.
    Baseline,
    LikelihoodOnly,
    PriorOnly,
    Full,
}

impl AblationMode {
    pub const ALL: [AblationMode; 4] =
        [AblationMode::Baseline, AblationMode::LikelihoodOnly, AblationMode::PriorOnly, AblationMode::Full];

    pub fn policy(self, strategy: UpdateStrategy) -> UpdatePolicy {
        let (likelihood, prior) = match self {
            AblationMode::Baseline => (false, false),
            AblationMode::LikelihoodOnly => (true, false),
            AblationMode::PriorOnly => (false, true),
            AblationMode::Full => (true, true),
        };
        UpdatePolicy { likelihood, prior, strategy }
    }

    pub fn name(self) -> &'static str {
        match self {
            AblationMode::Baseline => "baseline",
            AblationMode::LikelihoodOnly => "likelihood_only",
            AblationMode::PriorOnly => "prior_only",
            AblationMode::Full => "full",
        }
    }
}

impl fmt::Display for AblationMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for AblationMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().replace('-', "_").as_str() {
            "baseline" | "frozen" => Ok(AblationMode::Baseline),
            "likelihood_only" | "likelihood" | "la" => Ok(AblationMode::LikelihoodOnly),
            "prior_only" | "prior" | "pa" => Ok(AblationMode::PriorOnly),
            "full" => Ok(AblationMode::Full),
            _ => Err(Error::InvalidConfig(format!(
                "unknown mode `{s}` (expected baseline, likelihood_only, prior_only or full)"
            ))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RunOptions {
    pub mode: AblationMode,
    pub strategy: UpdateStrategy,
    /// Window length for windowed accuracy.
    pub window: usize,
    /// Record per-phase wall time. Off by default so reports are
    /// reproducible byte for byte.
    pub time_phases: bool,
}

impl RunOptions {
    pub fn new(mode: AblationMode) -> Self {
        Self { mode, strategy: UpdateStrategy::CountBased, window: DEFAULT_WINDOW, time_phases: false }
    }

    pub fn validate(&self) -> Result<()> {
        if self.window == 0 {
            return Err(Error::InvalidConfig("window must be positive".into()));
        }
        self.strategy.validate()
    }
}

impl Default for RunOptions {
    fn default() -> Self {
        Self::new(AblationMode::Full)
    }
}

/// Accumulated wall time per phase, in seconds.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub(crate) struct PhaseClock {
    pub membership: f64,
    pub posterior: f64,
    pub update_compute: f64,
    pub state_write: f64,
    pub steps: usize,
    pub updates: usize,
}

/// Durations of one step's phases; update phases are zero when nothing fired.
#[derive(Debug, Clone, Copy, Default)]
pub(crate) struct StepTimes {
    pub membership: f64,
    pub posterior: f64,
    pub update_compute: f64,
    pub state_write: f64,
    pub total: f64,
}

/// Sequential processor for one stream. Holds scratch buffers so the hot
/// path does not allocate beyond the planned update rows.
pub struct StreamRunner<'a, T> {
    state: &'a mut AdapterState<T>,
    options: RunOptions,
    policy: UpdatePolicy,
    membership: Vec<f64>,
    posterior: Vec<f64>,
    pub(crate) clock: PhaseClock,
    warnings: usize,
}

impl<'a, T: Scalar> StreamRunner<'a, T> {
    pub fn new(state: &'a mut AdapterState<T>, options: RunOptions) -> Result<Self> {
        options.validate()?;
        let k = state.config().num_classes;
        Ok(Self {
            policy: options.mode.policy(options.strategy),
            membership: Vec::with_capacity(state.config().num_embeddings),
            posterior: vec![0.0; k],
            state,
            options,
            clock: PhaseClock::default(),
            warnings: 0,
        })
    }

    pub fn state(&self) -> &AdapterState<T> {
        self.state
    }

    pub fn warnings(&self) -> usize {
        self.warnings
    }

    /// Check a batch before any of it is processed.
    pub fn check(&self, stream: &[LabeledEmbedding<T>], start_index: usize) -> Result<()> {
        let d = self.state.config().dim;
        let k = self.state.config().num_classes;
        for (i, s) in stream.iter().enumerate() {
            if s.embedding.dim() != d {
                return Err(Error::DimensionMismatch { expected: d, got: s.embedding.dim() });
            }
            match s.class() {
                Some(c) if c < k => {}
                Some(_) => {
                    return Err(Error::IndexOutOfRange { index: s.label as usize, len: k });
                }
                None => return Err(Error::Unlabeled { index: start_index + i }),
            }
        }
        Ok(())
    }

    /// Prediction and (possibly) adaptation for one labeled sample.
    pub fn process(&mut self, index: usize, sample: &LabeledEmbedding<T>) -> Result<MetricsRecord> {
        let label = sample.class().ok_or(Error::Unlabeled { index })?;
        let f = sample.embedding.as_slice();
        if f.len() != self.state.config().dim {
            return Err(Error::DimensionMismatch { expected: self.state.config().dim, got: f.len() });
        }
        let (record, times) = self.step_timed(index, f, label)?;
        if self.options.time_phases {
            self.clock.membership += times.membership;
            self.clock.posterior += times.posterior;
            self.clock.update_compute += times.update_compute;
            self.clock.state_write += times.state_write;
        }
        self.clock.steps += 1;
        self.clock.updates += record.updated as usize;
        Ok(record)
    }

    pub(crate) fn step_timed(&mut self, index: usize, f: &[T], label: usize) -> Result<(MetricsRecord, StepTimes)> {
        let timed = self.options.time_phases;
        let mut times = StepTimes::default();
        let t0 = timed.then(Instant::now);

        self.state.membership_raw(f, &mut self.membership);
        let t1 = timed.then(Instant::now);

        if self.options.mode == AblationMode::Baseline {
            let agg = aggregate_by_class(&self.membership, self.posterior.len());
            self.posterior.copy_from_slice(&agg);
        } else {
            mix_raw(&self.membership, self.state.priors(), &mut self.posterior);
        }
        let t2 = timed.then(Instant::now);

        let (s, p_s) = select(&self.membership)?;
        let predicted = argmax(&self.posterior);
        let updated = self.policy.adapts() && p_s > self.state.config().tau;
        if updated {
            let pending = self.state.plan_update(s, f, &self.posterior, &self.policy);
            let t3 = timed.then(Instant::now);
            self.warnings += pending.warning.is_some() as usize;
            self.state.commit(pending);
            if let (Some(t2), Some(t3)) = (t2, t3) {
                times.update_compute = (t3 - t2).as_secs_f64();
                times.state_write = t3.elapsed().as_secs_f64();
            }
        }
        if let (Some(t0), Some(t1), Some(t2)) = (t0, t1, t2) {
            times.membership = (t1 - t0).as_secs_f64();
            times.posterior = (t2 - t1).as_secs_f64();
            times.total = t0.elapsed().as_secs_f64();
        }
        let record = MetricsRecord {
            index,
            predicted,
            label: label as i32,
            correct: predicted == label,
            updated,
            selected_index: s,
            selected_prob: p_s,
        };
        Ok((record, times))
    }
}

fn argmax(v: &[f64]) -> usize {
    let mut best = 0;
    for (i, &x) in v.iter().enumerate().skip(1) {
        if x > v[best] {
            best = i;
        }
    }
    best
}

/// Run `stream` through `state` in order, one sample at a time.
///
/// The whole stream is validated first, so an error leaves `state`
/// untouched. Baseline mode never writes to `state`.
pub fn run_stream<T: Scalar>(
    state: &mut AdapterState<T>,
    stream: &[LabeledEmbedding<T>],
    options: &RunOptions,
) -> Result<RunReport> {
    run_stream_from(state, stream, 0, options, |_, _| Ok(()))
}

/// Like [`run_stream`], numbering samples from `start_index` and calling
/// `after_step(index, state)` after every sample (for example to write
/// periodic checkpoints).
pub fn run_stream_from<T, F>(
    state: &mut AdapterState<T>,
    stream: &[LabeledEmbedding<T>],
    start_index: usize,
    options: &RunOptions,
    mut after_step: F,
) -> Result<RunReport>
where
    T: Scalar,
    F: FnMut(usize, &AdapterState<T>) -> Result<()>,
{
    let config = *state.config();
    let mut runner = StreamRunner::new(state, *options)?;
    runner.check(stream, start_index)?;
    let mut records = Vec::with_capacity(stream.len());
    for (i, sample) in stream.iter().enumerate() {
        let index = start_index + i;
        records.push(runner.process(index, sample)?);
        after_step(index, runner.state())?;
    }
    let timings = options.time_phases.then(|| PhaseTimings::mean_of(&runner.clock));
    let warnings = runner.warnings();
    Ok(RunReport::new(config, *options, records, timings, warnings))
}
