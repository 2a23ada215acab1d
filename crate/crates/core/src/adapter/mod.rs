//! Adapter state and the adaptation step.
//!
//! Per arriving embedding `f` the adapter computes
//!
//! ```text
//! membership = softmax(temperature * U f)      (length M)
//! posterior  = membership^T V                  (length K)
//! s          = argmax membership
//! if membership[s] > tau:
//!     U[s] <- normalize((C1[s] * U[s] + f) / (C1[s] + 1));  C1[s] += 1
//!     V[s] <- (C2[s] * V[s] + posterior) / (C2[s] + 1);     C2[s] += 1
//! ```
//!
//! and returns the posterior computed before any mutation.

mod bank;
mod config;

use serde::{Deserialize, Serialize};

pub use bank::{ClassEmbeddingBank, CounterVector, PriorMatrix};
pub use config::{AdapterConfig, Preset, DEFAULT_TEMPERATURE};

use crate::embedding::{dot, EmbeddingVector};
use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Tolerance on the sum of a probability vector handed to the adapter.
pub const SIMPLEX_TOLERANCE: f64 = 1e-6;

/// Weighted means whose norm falls below this are treated as degenerate.
pub const DEGENERATE_NORM: f64 = 1e-12;

/// How a firing update folds new evidence into a row.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum UpdateStrategy {
    /// Count-weighted running mean: weight `1 / (count + 1)` on the new value.
    #[default]
    CountBased,
    /// Fixed convex weight `alpha` on the new value. Counters still advance.
    Momentum { alpha: f64 },
}

impl UpdateStrategy {
    pub fn validate(&self) -> Result<()> {
        match *self {
            UpdateStrategy::CountBased => Ok(()),
            UpdateStrategy::Momentum { alpha } if alpha > 0.0 && alpha < 1.0 => Ok(()),
            UpdateStrategy::Momentum { alpha } => {
                Err(Error::InvalidConfig(format!("momentum alpha must lie in (0, 1), got {alpha}")))
            }
        }
    }

    /// Blend one coordinate of a row whose counter reads `count`.
    #[inline]
    fn blend(&self, count: u64, old: f64, incoming: f64) -> f64 {
        match *self {
            UpdateStrategy::CountBased => {
                let c = count as f64;
                (c * old + incoming) / (c + 1.0)
            }
            UpdateStrategy::Momentum { alpha } => (1.0 - alpha) * old + alpha * incoming,
        }
    }
}

/// Which halves of the adaptation fire when the threshold is passed.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UpdatePolicy {
    pub likelihood: bool,
    pub prior: bool,
    pub strategy: UpdateStrategy,
}

impl UpdatePolicy {
    pub const FULL: Self = Self { likelihood: true, prior: true, strategy: UpdateStrategy::CountBased };
    pub const FROZEN: Self = Self { likelihood: false, prior: false, strategy: UpdateStrategy::CountBased };

    pub fn adapts(&self) -> bool {
        self.likelihood || self.prior
    }
}

impl Default for UpdatePolicy {
    fn default() -> Self {
        Self::FULL
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StepWarning {
    /// The weighted mean for embedding `index` had near-zero norm; the
    /// embedding was kept and its counter still advanced.
    DegenerateEmbeddingUpdate { index: usize },
}

#[derive(Debug, Clone, PartialEq)]
pub struct StepOutcome {
    pub membership: Vec<f64>,
    /// The prediction, computed before any state mutation.
    pub posterior: Vec<f64>,
    pub selected_index: usize,
    pub selected_prob: f64,
    pub updated: bool,
    pub predicted_class: usize,
    pub warning: Option<StepWarning>,
}

/// Row values computed for one update, not yet written to the state.
#[derive(Debug, Clone)]
pub struct PendingUpdate<T> {
    pub index: usize,
    /// New embedding row; `None` if likelihood adaptation is off or the
    /// weighted mean was degenerate.
    pub embedding: Option<Vec<T>>,
    pub prior: Option<Vec<T>>,
    pub bump_c1: bool,
    pub bump_c2: bool,
    pub warning: Option<StepWarning>,
}

/// Class-embedding bank, prior matrix and counters for one stream.
///
/// Steps mutate the state and must be serialized; clones are independent.
#[derive(Debug, Clone, PartialEq)]
pub struct AdapterState<T> {
    config: AdapterConfig,
    bank: ClassEmbeddingBank<T>,
    priors: PriorMatrix<T>,
    c1: CounterVector,
    c2: CounterVector,
}

impl<T: Scalar> AdapterState<T> {
    /// Fresh state: bank rows are the given text embeddings, prior rows are
    /// one-hot at `m % K`, counters start at `n1` / `n2`.
    pub fn init(text_embeddings: Vec<EmbeddingVector<T>>, config: AdapterConfig) -> Result<Self> {
        config.validate()?;
        if text_embeddings.len() != config.num_embeddings {
            return Err(Error::LengthMismatch { expected: config.num_embeddings, got: text_embeddings.len() });
        }
        if let Some(bad) = text_embeddings.iter().find(|e| e.dim() != config.dim) {
            return Err(Error::DimensionMismatch { expected: config.dim, got: bad.dim() });
        }
        let m = config.num_embeddings;
        Ok(Self {
            bank: ClassEmbeddingBank::new(text_embeddings, config.num_classes)?,
            priors: PriorMatrix::one_hot(m, config.num_classes),
            c1: CounterVector::filled(m, config.n1),
            c2: CounterVector::filled(m, config.n2),
            config,
        })
    }

    /// Reassemble a state from parts, checking shapes and counter floors.
    pub fn from_parts(
        config: AdapterConfig,
        bank: ClassEmbeddingBank<T>,
        priors: PriorMatrix<T>,
        c1: CounterVector,
        c2: CounterVector,
    ) -> Result<Self> {
        config.validate()?;
        let m = config.num_embeddings;
        let shape_ok = bank.len() == m
            && bank.dim() == config.dim
            && bank.num_classes() == config.num_classes
            && priors.len() == m
            && priors.num_classes() == config.num_classes
            && c1.len() == m
            && c2.len() == m;
        if !shape_ok {
            return Err(Error::InvariantViolation("component shapes disagree with config".into()));
        }
        if let Some(i) = c1.as_slice().iter().position(|&c| c < config.n1) {
            return Err(Error::InvariantViolation(format!("C1[{i}] is below n1")));
        }
        if let Some(i) = c2.as_slice().iter().position(|&c| c < config.n2) {
            return Err(Error::InvariantViolation(format!("C2[{i}] is below n2")));
        }
        Ok(Self { config, bank, priors, c1, c2 })
    }

    pub fn config(&self) -> &AdapterConfig {
        &self.config
    }

    pub fn bank(&self) -> &ClassEmbeddingBank<T> {
        &self.bank
    }

    pub fn priors(&self) -> &PriorMatrix<T> {
        &self.priors
    }

    pub fn c1(&self) -> &CounterVector {
        &self.c1
    }

    pub fn c2(&self) -> &CounterVector {
        &self.c2
    }

    fn check_input(&self, f: &EmbeddingVector<T>) -> Result<()> {
        if f.dim() != self.config.dim {
            return Err(Error::DimensionMismatch { expected: self.config.dim, got: f.dim() });
        }
        Ok(())
    }

    /// `P(mu_m | f)`: softmax over `temperature * cos(f, mu_m)`.
    pub fn membership_probs(&self, f: &EmbeddingVector<T>) -> Result<Vec<f64>> {
        self.check_input(f)?;
        let mut out = Vec::with_capacity(self.bank.len());
        membership_into(&self.bank, f.as_slice(), self.config.temperature, &mut out);
        Ok(out)
    }

    pub(crate) fn membership_raw(&self, f: &[T], out: &mut Vec<f64>) {
        membership_into(&self.bank, f, self.config.temperature, out);
    }

    /// Full adaptation step (both halves, count-based).
    pub fn step(&mut self, f: &EmbeddingVector<T>) -> Result<StepOutcome> {
        self.step_with(f, &UpdatePolicy::FULL)
    }

    pub fn step_with(&mut self, f: &EmbeddingVector<T>, policy: &UpdatePolicy) -> Result<StepOutcome> {
        self.check_input(f)?;
        policy.strategy.validate()?;
        let mut membership = Vec::with_capacity(self.bank.len());
        self.membership_raw(f.as_slice(), &mut membership);
        let mut posterior = vec![0.0; self.config.num_classes];
        mix_into(&membership, &self.priors, &mut posterior);
        let (s, p_s) = select(&membership)?;
        let fires = p_s > self.config.tau;
        let mut warning = None;
        if fires && policy.adapts() {
            let pending = self.plan_update(s, f.as_slice(), &posterior, policy);
            warning = pending.warning;
            self.commit(pending);
        }
        Ok(StepOutcome {
            predicted_class: argmax(&posterior),
            membership,
            posterior,
            selected_index: s,
            selected_prob: p_s,
            updated: fires && policy.adapts(),
            warning,
        })
    }

    /// Compute the new rows for an update of embedding `s` without writing
    /// them. Inputs are trusted; public entry points validate first.
    pub fn plan_update(&self, s: usize, f: &[T], posterior: &[f64], policy: &UpdatePolicy) -> PendingUpdate<T> {
        let mut pending = PendingUpdate {
            index: s,
            embedding: None,
            prior: None,
            bump_c1: policy.likelihood,
            bump_c2: policy.prior,
            warning: None,
        };
        if policy.likelihood {
            let count = self.c1.get(s);
            let mean: Vec<f64> = self
                .bank
                .row(s)
                .iter()
                .zip(f)
                .map(|(u, x)| policy.strategy.blend(count, u.as_f64(), x.as_f64()))
                .collect();
            let n = mean.iter().map(|v| v * v).sum::<f64>().sqrt();
            if n < DEGENERATE_NORM {
                pending.warning = Some(StepWarning::DegenerateEmbeddingUpdate { index: s });
            } else {
                pending.embedding = Some(mean.iter().map(|v| T::from_f64_round(v / n)).collect());
            }
        }
        if policy.prior {
            let count = self.c2.get(s);
            let row: Vec<f64> = self
                .priors
                .row(s)
                .iter()
                .zip(posterior)
                .map(|(v, p)| policy.strategy.blend(count, v.as_f64(), *p))
                .collect();
            // The blend of two distributions sums to 1 exactly; dividing by
            // the computed sum stops storage rounding from accumulating.
            let sum: f64 = row.iter().sum();
            pending.prior = Some(row.iter().map(|v| T::from_f64_round(v / sum)).collect());
        }
        pending
    }

    pub fn commit(&mut self, pending: PendingUpdate<T>) {
        let s = pending.index;
        if let Some(row) = pending.embedding {
            self.bank.row_mut(s).copy_from_slice(&row);
        }
        if let Some(row) = pending.prior {
            self.priors.row_mut(s).copy_from_slice(&row);
        }
        if pending.bump_c1 {
            self.c1.increment(s);
        }
        if pending.bump_c2 {
            self.c2.increment(s);
        }
    }

    /// Fold `f` into embedding `s` and advance `C1[s]`. The caller is
    /// responsible for the threshold check.
    pub fn update_class_embedding(&mut self, s: usize, f: &EmbeddingVector<T>) -> Result<Option<StepWarning>> {
        self.check_index(s)?;
        self.check_input(f)?;
        let policy = UpdatePolicy { likelihood: true, prior: false, strategy: UpdateStrategy::CountBased };
        let pending = self.plan_update(s, f.as_slice(), &[], &policy);
        let warning = pending.warning;
        self.commit(pending);
        Ok(warning)
    }

    /// Fold `posterior` into prior row `s` and advance `C2[s]`.
    pub fn update_prior(&mut self, s: usize, posterior: &[f64]) -> Result<()> {
        self.check_index(s)?;
        check_simplex(posterior, self.config.num_classes)?;
        let policy = UpdatePolicy { likelihood: false, prior: true, strategy: UpdateStrategy::CountBased };
        let pending = self.plan_update(s, &[], posterior, &policy);
        self.commit(pending);
        Ok(())
    }

    fn check_index(&self, s: usize) -> Result<()> {
        if s >= self.bank.len() {
            return Err(Error::IndexOutOfRange { index: s, len: self.bank.len() });
        }
        Ok(())
    }

    /// Bytes held by the prior matrix at the on-disk `f32` width.
    pub fn prior_bytes_f32(&self) -> usize {
        self.priors.as_flat().len() * 4
    }
}

fn membership_into<T: Scalar>(bank: &ClassEmbeddingBank<T>, f: &[T], temperature: f64, out: &mut Vec<f64>) {
    out.clear();
    out.extend(bank.rows().map(|row| temperature * dot(row, f)));
    softmax_in_place(out);
}

pub(crate) fn softmax_in_place(logits: &mut [f64]) {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut sum = 0.0;
    for l in logits.iter_mut() {
        *l = (*l - max).exp();
        sum += *l;
    }
    let inv = 1.0 / sum;
    for l in logits.iter_mut() {
        *l *= inv;
    }
}

fn mix_into<T: Scalar>(membership: &[f64], priors: &PriorMatrix<T>, out: &mut [f64]) {
    out.fill(0.0);
    for (p, row) in membership.iter().zip(priors.rows()) {
        for (acc, v) in out.iter_mut().zip(row) {
            *acc += p * v.as_f64();
        }
    }
}

pub(crate) fn mix_raw<T: Scalar>(membership: &[f64], priors: &PriorMatrix<T>, out: &mut [f64]) {
    mix_into(membership, priors, out)
}

fn check_simplex(p: &[f64], len: usize) -> Result<()> {
    if p.len() != len {
        return Err(Error::LengthMismatch { expected: len, got: p.len() });
    }
    if let Some(index) = p.iter().position(|v| !v.is_finite()) {
        return Err(Error::NonFinite { index });
    }
    let sum: f64 = p.iter().sum();
    let min = p.iter().copied().fold(f64::INFINITY, f64::min);
    if (sum - 1.0).abs() > SIMPLEX_TOLERANCE || min < 0.0 {
        return Err(Error::NotSimplex { sum, min });
    }
    Ok(())
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

/// `sum_m membership[m] * priors[m]`.
pub fn posterior_from_membership<T: Scalar>(membership: &[f64], priors: &PriorMatrix<T>) -> Result<Vec<f64>> {
    if membership.len() != priors.len() {
        return Err(Error::LengthMismatch { expected: priors.len(), got: membership.len() });
    }
    let mut out = vec![0.0; priors.num_classes()];
    mix_into(membership, priors, &mut out);
    Ok(out)
}

/// Index and value of the largest entry; ties go to the lowest index.
pub fn select(membership: &[f64]) -> Result<(usize, f64)> {
    if membership.is_empty() {
        return Err(Error::EmptyInput);
    }
    let s = argmax(membership);
    Ok((s, membership[s]))
}

/// The no-adaptation prediction: membership mass summed per class `m % K`.
/// With `M = K` this is the plain softmax over class similarities.
pub fn frozen_posterior<T: Scalar>(
    bank: &ClassEmbeddingBank<T>,
    f: &EmbeddingVector<T>,
    temperature: f64,
    num_classes: usize,
) -> Result<Vec<f64>> {
    if f.dim() != bank.dim() {
        return Err(Error::DimensionMismatch { expected: bank.dim(), got: f.dim() });
    }
    if num_classes == 0 || bank.len() < num_classes {
        return Err(Error::TooFewEmbeddings { m: bank.len(), k: num_classes });
    }
    let mut membership = Vec::with_capacity(bank.len());
    membership_into(bank, f.as_slice(), temperature, &mut membership);
    Ok(aggregate_by_class(&membership, num_classes))
}

pub(crate) fn aggregate_by_class(membership: &[f64], num_classes: usize) -> Vec<f64> {
    let mut out = vec![0.0; num_classes];
    for (m, p) in membership.iter().enumerate() {
        out[m % num_classes] += p;
    }
    out
}
