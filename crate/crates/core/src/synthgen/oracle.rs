//! Brute-force reference computations.
//!
//! These work on plain `Vec<Vec<f64>>` with explicit loops and share no code
//! with the adapter's kernels. They exist to be compared against.

#![allow(clippy::needless_range_loop)]

/// One fired update as observed in a run: embedding `index` absorbed
/// `embedding` and `posterior`.
#[derive(Debug, Clone, PartialEq)]
pub struct RecordedUpdate {
    pub index: usize,
    pub embedding: Vec<f64>,
    pub posterior: Vec<f64>,
}

fn cosine(a: &[f64], b: &[f64]) -> f64 {
    let mut ab = 0.0;
    let mut aa = 0.0;
    let mut bb = 0.0;
    for i in 0..a.len() {
        ab += a[i] * b[i];
        aa += a[i] * a[i];
        bb += b[i] * b[i];
    }
    ab / (aa.sqrt() * bb.sqrt())
}

/// Membership probabilities by direct evaluation of
/// `exp(t cos(f, u_m)) / sum_j exp(t cos(f, u_j))`.
pub fn oracle_membership(bank: &[Vec<f64>], f: &[f64], temperature: f64) -> Vec<f64> {
    let mut logits = Vec::new();
    for row in bank {
        logits.push(temperature * cosine(f, row));
    }
    let mut max = f64::NEG_INFINITY;
    for &l in &logits {
        if l > max {
            max = l;
        }
    }
    let mut denom = 0.0;
    for &l in &logits {
        denom += (l - max).exp();
    }
    let mut out = Vec::new();
    for &l in &logits {
        out.push((l - max).exp() / denom);
    }
    out
}

/// Posterior `sum_m P(mu_m | f) P(Y | mu_m)` with double loops.
pub fn oracle_posterior(bank: &[Vec<f64>], priors: &[Vec<f64>], f: &[f64], temperature: f64) -> Vec<f64> {
    let membership = oracle_membership(bank, f, temperature);
    let k = priors[0].len();
    let mut out = vec![0.0; k];
    for c in 0..k {
        for m in 0..bank.len() {
            out[c] += membership[m] * priors[m][c];
        }
    }
    out
}

/// The plain zero-shot softmax over one text embedding per class.
pub fn oracle_zero_shot(text: &[Vec<f64>], f: &[f64], temperature: f64) -> Vec<f64> {
    let sims: Vec<f64> = text.iter().map(|t| (temperature * cosine(f, t)).exp()).collect();
    let total: f64 = sims.iter().sum();
    sims.iter().map(|s| s / total).collect()
}

/// Closed-form running means for a recorded update sequence.
///
/// Prior row `s` becomes `(n2 * V0[s] + sum p) / (n2 + n_s)`, exact.
/// Embedding row `s` becomes the direction of `n1 * U0[s] + sum f`. The
/// streaming update renormalizes after every step, so this direction agrees
/// with it up to `O(n_s^{3/2} / n1^2)`; it is tight when `n1` dominates the
/// number of updates a row receives. [`oracle_replay`] is the exact recursion.
pub fn oracle_running_state(
    initial_bank: &[Vec<f64>],
    initial_priors: &[Vec<f64>],
    n1: u64,
    n2: u64,
    updates: &[RecordedUpdate],
) -> (Vec<Vec<f64>>, Vec<Vec<f64>>) {
    let mut bank_sum: Vec<Vec<f64>> = initial_bank.iter().map(|r| r.iter().map(|v| v * n1 as f64).collect()).collect();
    let mut prior_sum: Vec<Vec<f64>> =
        initial_priors.iter().map(|r| r.iter().map(|v| v * n2 as f64).collect()).collect();
    let mut hits = vec![0u64; initial_bank.len()];
    for u in updates {
        for i in 0..u.embedding.len() {
            bank_sum[u.index][i] += u.embedding[i];
        }
        for k in 0..u.posterior.len() {
            prior_sum[u.index][k] += u.posterior[k];
        }
        hits[u.index] += 1;
    }
    let mut bank = Vec::new();
    let mut priors = Vec::new();
    for m in 0..initial_bank.len() {
        if hits[m] == 0 {
            bank.push(initial_bank[m].clone());
            priors.push(initial_priors[m].clone());
            continue;
        }
        let norm = bank_sum[m].iter().map(|v| v * v).sum::<f64>().sqrt();
        bank.push(bank_sum[m].iter().map(|v| v / norm).collect());
        let denom = (n2 + hits[m]) as f64;
        priors.push(prior_sum[m].iter().map(|v| v / denom).collect());
    }
    (bank, priors)
}

/// Sequential count-weighted recursion with per-step renormalization of the
/// embedding rows.
pub fn oracle_replay(
    initial_bank: &[Vec<f64>],
    initial_priors: &[Vec<f64>],
    n1: u64,
    n2: u64,
    updates: &[RecordedUpdate],
) -> (Vec<Vec<f64>>, Vec<Vec<f64>>) {
    let mut bank = initial_bank.to_vec();
    let mut priors = initial_priors.to_vec();
    let mut c1 = vec![n1 as f64; bank.len()];
    let mut c2 = vec![n2 as f64; bank.len()];
    for u in updates {
        let s = u.index;
        let mut next: Vec<f64> = Vec::new();
        for i in 0..u.embedding.len() {
            next.push((c1[s] * bank[s][i] + u.embedding[i]) / (c1[s] + 1.0));
        }
        let norm = next.iter().map(|v| v * v).sum::<f64>().sqrt();
        if norm >= 1e-12 {
            bank[s] = next.iter().map(|v| v / norm).collect();
        }
        c1[s] += 1.0;
        for k in 0..u.posterior.len() {
            priors[s][k] = (c2[s] * priors[s][k] + u.posterior[k]) / (c2[s] + 1.0);
        }
        c2[s] += 1.0;
    }
    (bank, priors)
}

/// Which adaptation halves an [`oracle_run`] applies.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct OracleArms {
    pub likelihood: bool,
    pub prior: bool,
}

/// Hyperparameters for [`oracle_run`].
#[derive(Debug, Clone, Copy)]
pub struct OracleParams {
    pub num_classes: usize,
    pub tau: f64,
    pub n1: u64,
    pub n2: u64,
    pub temperature: f64,
}

/// Naive end-to-end streaming run. Returns per-sample correctness flags of
/// the pre-update prediction against `labels`.
pub fn oracle_run(
    text: &[Vec<f64>],
    stream: &[Vec<f64>],
    labels: &[i32],
    params: OracleParams,
    arms: OracleArms,
) -> Vec<bool> {
    let k = params.num_classes;
    let m_total = text.len();
    let mut bank = text.to_vec();
    let mut priors = Vec::new();
    for m in 0..m_total {
        let mut row = vec![0.0; k];
        row[m % k] = 1.0;
        priors.push(row);
    }
    let mut c1 = vec![params.n1 as f64; m_total];
    let mut c2 = vec![params.n2 as f64; m_total];
    let mut correct = Vec::with_capacity(stream.len());
    for (f, &label) in stream.iter().zip(labels) {
        let membership = oracle_membership(&bank, f, params.temperature);
        let mut posterior = vec![0.0; k];
        for c in 0..k {
            for m in 0..m_total {
                posterior[c] += membership[m] * priors[m][c];
            }
        }
        let mut pred = 0;
        for c in 1..k {
            if posterior[c] > posterior[pred] {
                pred = c;
            }
        }
        correct.push(pred as i32 == label);
        let mut s = 0;
        for m in 1..m_total {
            if membership[m] > membership[s] {
                s = m;
            }
        }
        if membership[s] > params.tau {
            if arms.likelihood {
                let mut next = Vec::new();
                for i in 0..f.len() {
                    next.push((c1[s] * bank[s][i] + f[i]) / (c1[s] + 1.0));
                }
                let norm = next.iter().map(|v| v * v).sum::<f64>().sqrt();
                if norm >= 1e-12 {
                    bank[s] = next.iter().map(|v| v / norm).collect();
                }
                c1[s] += 1.0;
            }
            if arms.prior {
                for c in 0..k {
                    priors[s][c] = (c2[s] * priors[s][c] + posterior[c]) / (c2[s] + 1.0);
                }
                c2[s] += 1.0;
            }
        }
    }
    correct
}

/// Accuracy over indices `>= ceil(n / 2)`.
pub fn last_half_accuracy(correct: &[bool]) -> f64 {
    let start = correct.len().div_ceil(2);
    let tail = &correct[start..];
    tail.iter().filter(|&&c| c).count() as f64 / tail.len() as f64
}
