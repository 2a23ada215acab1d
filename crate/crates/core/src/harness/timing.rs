use super::{AblationMode, RunOptions, StreamRunner};
use crate::adapter::AdapterState;
use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::synthgen::LabeledEmbedding;

/// Per-phase median wall time in seconds. Update phases are taken over the
/// steps where an update fired; `updates` counts those samples.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct PhaseMedians {
    pub membership: f64,
    pub posterior: f64,
    pub update_compute: f64,
    pub state_write: f64,
    /// Whole-step latency.
    pub step: f64,
    pub samples: usize,
    pub updates: usize,
}

fn median(v: &mut [f64]) -> f64 {
    if v.is_empty() {
        return 0.0;
    }
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

/// Time every phase of a full-mode run of `stream`, repeated from a fresh
/// copy of `state` each time. Streams of at least 1000 samples give stable
/// medians. `state` itself is not modified.
pub fn time_phases<T: Scalar>(
    state: &AdapterState<T>,
    stream: &[LabeledEmbedding<T>],
    repetitions: usize,
) -> Result<PhaseMedians> {
    if repetitions == 0 {
        return Err(Error::InvalidConfig("repetitions must be positive".into()));
    }
    if stream.is_empty() {
        return Err(Error::EmptyInput);
    }
    let options = RunOptions { time_phases: true, ..RunOptions::new(AblationMode::Full) };
    let n = stream.len() * repetitions;
    let (mut t2, mut t3, mut total) = (Vec::with_capacity(n), Vec::with_capacity(n), Vec::with_capacity(n));
    let (mut cal, mut rw) = (Vec::new(), Vec::new());
    for _ in 0..repetitions {
        let mut copy = state.clone();
        let mut runner = StreamRunner::new(&mut copy, options)?;
        runner.check(stream, 0)?;
        for (i, sample) in stream.iter().enumerate() {
            let label = sample.class().ok_or(Error::Unlabeled { index: i })?;
            let (record, times) = runner.step_timed(i, sample.embedding.as_slice(), label)?;
            t2.push(times.membership);
            t3.push(times.posterior);
            total.push(times.total);
            if record.updated {
                cal.push(times.update_compute);
                rw.push(times.state_write);
            }
        }
    }
    Ok(PhaseMedians {
        membership: median(&mut t2),
        posterior: median(&mut t3),
        update_compute: median(&mut cal),
        state_write: median(&mut rw),
        step: median(&mut total),
        samples: n,
        updates: cal.len(),
    })
}
