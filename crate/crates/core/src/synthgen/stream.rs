use serde::{Deserialize, Serialize};

use super::rng::SplitMix64;
use crate::embedding::EmbeddingVector;
use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Sub-stream ids; each purpose draws from its own generator so that changing
/// one knob does not reshuffle the others.
mod stream_id {
    pub const MEANS: u64 = 1;
    pub const TEXT: u64 = 2;
    pub const ROTATION: u64 = 3;
    pub const LABELS: u64 = 4;
    pub const CONFUSION: u64 = 5;
    pub const NOISE: u64 = 6;
}

const MEAN_ATTEMPTS: usize = 1000;

pub const DEFAULT_MIN_SEPARATION: f64 = 0.5;

/// Unlabeled marker in [`LabeledEmbedding::label`].
pub const UNLABELED: i32 = -1;

#[derive(Debug, Clone, PartialEq)]
pub struct LabeledEmbedding<T> {
    pub embedding: EmbeddingVector<T>,
    /// Class index, or [`UNLABELED`].
    pub label: i32,
}

impl<T: Scalar> LabeledEmbedding<T> {
    pub fn new(embedding: EmbeddingVector<T>, label: i32) -> Self {
        Self { embedding, label }
    }

    pub fn class(&self) -> Option<usize> {
        usize::try_from(self.label).ok()
    }
}

/// How the test stream departs from the class means the text embeddings
/// were generated around.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ShiftModel {
    None,
    /// Every class mean is rotated by `angle` radians within a random 2-plane
    /// containing it. Text embeddings keep pointing at the unrotated means.
    MeanRotation {
        angle: f64,
    },
    /// A sample labeled `y` is generated from the mean of class `z ~ matrix[y]`.
    /// The recorded label stays `y`.
    Confusion {
        matrix: Vec<Vec<f64>>,
    },
    /// Labels are drawn proportionally to `weights` instead of uniformly.
    LabelSkew {
        weights: Vec<f64>,
    },
    /// Several of the above at once, at most one of each kind.
    Combined {
        parts: Vec<ShiftModel>,
    },
}

impl ShiftModel {
    /// Confusion matrix with `diagonal` on the diagonal and the remaining mass
    /// spread uniformly over the other classes.
    pub fn confusion_with_diagonal(num_classes: usize, diagonal: f64) -> Self {
        let off = if num_classes > 1 { (1.0 - diagonal) / (num_classes - 1) as f64 } else { 0.0 };
        let matrix =
            (0..num_classes).map(|y| (0..num_classes).map(|z| if y == z { diagonal } else { off }).collect()).collect();
        ShiftModel::Confusion { matrix }
    }

    fn parts(&self) -> Vec<&ShiftModel> {
        match self {
            ShiftModel::Combined { parts } => parts.iter().collect(),
            ShiftModel::None => Vec::new(),
            other => vec![other],
        }
    }

    fn rotation(&self) -> Option<f64> {
        self.parts().into_iter().find_map(|p| match p {
            ShiftModel::MeanRotation { angle } => Some(*angle),
            _ => None,
        })
    }

    fn confusion(&self) -> Option<&Vec<Vec<f64>>> {
        self.parts().into_iter().find_map(|p| match p {
            ShiftModel::Confusion { matrix } => Some(matrix),
            _ => None,
        })
    }

    fn label_weights(&self) -> Option<&Vec<f64>> {
        self.parts().into_iter().find_map(|p| match p {
            ShiftModel::LabelSkew { weights } => Some(weights),
            _ => None,
        })
    }

    pub fn validate(&self, num_classes: usize) -> Result<()> {
        let spec_err = |reason: String| Error::InvalidSpec { field: "shift", reason };
        if let ShiftModel::Combined { parts } = self {
            let mut seen = [false; 3];
            for p in parts {
                let slot = match p {
                    ShiftModel::MeanRotation { .. } => 0,
                    ShiftModel::Confusion { .. } => 1,
                    ShiftModel::LabelSkew { .. } => 2,
                    ShiftModel::None => continue,
                    ShiftModel::Combined { .. } => return Err(spec_err("combined shifts cannot be nested".into())),
                };
                if std::mem::replace(&mut seen[slot], true) {
                    return Err(spec_err("combined shift repeats a component kind".into()));
                }
            }
        }
        for p in self.parts() {
            match p {
                ShiftModel::MeanRotation { angle } if !angle.is_finite() => {
                    return Err(spec_err(format!("rotation angle must be finite, got {angle}")));
                }
                ShiftModel::Confusion { matrix } => {
                    if matrix.len() != num_classes || matrix.iter().any(|r| r.len() != num_classes) {
                        return Err(spec_err(format!("confusion matrix must be {num_classes}x{num_classes}")));
                    }
                    for (y, row) in matrix.iter().enumerate() {
                        let sum: f64 = row.iter().sum();
                        if row.iter().any(|&v| !v.is_finite() || v < 0.0) || (sum - 1.0).abs() > 1e-9 {
                            return Err(spec_err(format!("confusion row {y} is not a probability vector")));
                        }
                    }
                }
                ShiftModel::LabelSkew { weights } => {
                    if weights.len() != num_classes {
                        return Err(spec_err(format!("label weights must have {num_classes} entries")));
                    }
                    if weights.iter().any(|&w| !w.is_finite() || w < 0.0) || weights.iter().sum::<f64>() <= 0.0 {
                        return Err(spec_err("label weights must be nonnegative with positive sum".into()));
                    }
                }
                _ => {}
            }
        }
        Ok(())
    }
}

fn default_min_separation() -> f64 {
    DEFAULT_MIN_SEPARATION
}

/// Declarative description of a labeled synthetic stream and its text bank.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StreamSpec {
    pub num_classes: usize,
    pub dim: usize,
    pub num_samples: usize,
    /// Text embeddings per class; the bank has `templates_per_class * num_classes` rows.
    pub templates_per_class: usize,
    /// Expected L2 norm of the isotropic perturbation added to each sample
    /// before renormalization (per-coordinate std `noise_scale / sqrt(d)`).
    pub noise_scale: f64,
    /// Same, for the offset between text embeddings and the class means.
    pub text_perturbation: f64,
    pub shift: ShiftModel,
    pub seed: u64,
    /// Required `1 - cos` between any two class means.
    #[serde(default = "default_min_separation")]
    pub min_separation: f64,
}

impl StreamSpec {
    pub fn new(num_classes: usize, dim: usize, num_samples: usize, seed: u64) -> Self {
        Self {
            num_classes,
            dim,
            num_samples,
            templates_per_class: 1,
            noise_scale: 1.0,
            text_perturbation: 0.0,
            shift: ShiftModel::None,
            seed,
            min_separation: DEFAULT_MIN_SEPARATION,
        }
    }

    pub fn num_embeddings(&self) -> usize {
        self.templates_per_class * self.num_classes
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |field, reason: &str| Err(Error::InvalidSpec { field, reason: reason.into() });
        if self.num_samples == 0 {
            return bad("num_samples", "must be positive");
        }
        if self.dim < 2 {
            return bad("dim", "must be at least 2");
        }
        if self.num_classes < 2 {
            return bad("num_classes", "must be at least 2");
        }
        if self.templates_per_class == 0 {
            return bad("templates_per_class", "must be positive");
        }
        if !(self.noise_scale >= 0.0 && self.noise_scale.is_finite()) {
            return bad("noise_scale", "must be finite and nonnegative");
        }
        if !(self.text_perturbation >= 0.0 && self.text_perturbation.is_finite()) {
            return bad("text_perturbation", "must be finite and nonnegative");
        }
        if !(0.0..=2.0).contains(&self.min_separation) {
            return bad("min_separation", "must lie in [0, 2]");
        }
        self.shift.validate(self.num_classes)
    }
}

/// Everything generated from one [`StreamSpec`].
#[derive(Debug, Clone)]
pub struct SyntheticTask<T> {
    pub means: Vec<EmbeddingVector<f64>>,
    pub text_embeddings: Vec<EmbeddingVector<T>>,
    pub stream: Vec<LabeledEmbedding<T>>,
}

pub fn generate<T: Scalar>(spec: &StreamSpec) -> Result<SyntheticTask<T>> {
    spec.validate()?;
    let means = make_class_means(spec.num_classes, spec.dim, spec.seed, spec.min_separation)?;
    let text_embeddings = make_text_embeddings(&means, spec.templates_per_class, spec.text_perturbation, spec.seed)?;
    let stream = sample_stream_from_means(spec, &means)?;
    Ok(SyntheticTask { means, text_embeddings, stream })
}

fn normalize(v: &mut [f64]) -> f64 {
    let n = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    for x in v.iter_mut() {
        *x /= n;
    }
    n
}

fn gaussian_vec(rng: &mut SplitMix64, d: usize, scale: f64) -> Vec<f64> {
    (0..d).map(|_| scale * rng.normal()).collect()
}

fn cast<T: Scalar>(v: &[f64]) -> EmbeddingVector<T> {
    EmbeddingVector::from_raw_unchecked(v.iter().map(|&x| T::from_f64_round(x)).collect())
}

/// `K` unit vectors with pairwise cosine at most `1 - min_separation`.
///
/// Vectors are drawn one at a time by rejection sampling with a fixed attempt
/// budget. For `K = 2` the pair is antipodal, the unique configuration at the
/// maximal separation of 2.
pub fn make_class_means(
    num_classes: usize,
    dim: usize,
    seed: u64,
    min_separation: f64,
) -> Result<Vec<EmbeddingVector<f64>>> {
    if num_classes == 0 || dim == 0 {
        return Err(Error::EmptyInput);
    }
    let infeasible =
        || Error::SeparationInfeasible { k: num_classes, separation: min_separation, attempts: MEAN_ATTEMPTS };
    if !(0.0..=2.0).contains(&min_separation) {
        return Err(infeasible());
    }
    let mut rng = SplitMix64::stream(seed, stream_id::MEANS);
    let draw = |rng: &mut SplitMix64| loop {
        let mut v = gaussian_vec(rng, dim, 1.0);
        if normalize(&mut v) > 1e-9 {
            return v;
        }
    };
    let max_cos = 1.0 - min_separation;
    let mut means: Vec<Vec<f64>> = Vec::with_capacity(num_classes);
    if num_classes == 2 {
        let v = draw(&mut rng);
        let w = v.iter().map(|x| -x).collect();
        means.push(v);
        means.push(w);
    } else {
        for _ in 0..num_classes {
            let mut placed = false;
            for _ in 0..MEAN_ATTEMPTS {
                let v = draw(&mut rng);
                let ok = means.iter().all(|m| m.iter().zip(&v).map(|(a, b)| a * b).sum::<f64>() <= max_cos);
                if ok {
                    means.push(v);
                    placed = true;
                    break;
                }
            }
            if !placed {
                return Err(infeasible());
            }
        }
    }
    Ok(means.into_iter().map(EmbeddingVector::from_raw_unchecked).collect())
}

/// `c * K` text embeddings; row `m` is a perturbed copy of `means[m % K]`.
pub fn make_text_embeddings<T: Scalar>(
    means: &[EmbeddingVector<f64>],
    templates_per_class: usize,
    text_perturbation: f64,
    seed: u64,
) -> Result<Vec<EmbeddingVector<T>>> {
    if templates_per_class == 0 || means.is_empty() {
        return Err(Error::EmptyInput);
    }
    let k = means.len();
    let d = means[0].dim();
    let mut rng = SplitMix64::stream(seed, stream_id::TEXT);
    let scale = text_perturbation / (d as f64).sqrt();
    let mut out = Vec::with_capacity(templates_per_class * k);
    for m in 0..templates_per_class * k {
        let base = means[m % k].as_slice();
        if text_perturbation == 0.0 {
            out.push(cast(base));
            continue;
        }
        let mut v: Vec<f64> = base.iter().zip(gaussian_vec(&mut rng, d, scale)).map(|(a, b)| a + b).collect();
        normalize(&mut v);
        out.push(cast(&v));
    }
    Ok(out)
}

/// Rotate each mean by `angle` within the plane spanned by it and a random
/// orthogonal direction.
fn rotate_means(means: &[EmbeddingVector<f64>], angle: f64, seed: u64) -> Vec<Vec<f64>> {
    let mut rng = SplitMix64::stream(seed, stream_id::ROTATION);
    means
        .iter()
        .map(|mean| {
            let mu = mean.as_slice();
            let u = loop {
                let mut g = gaussian_vec(&mut rng, mu.len(), 1.0);
                let proj: f64 = g.iter().zip(mu).map(|(a, b)| a * b).sum();
                for (x, m) in g.iter_mut().zip(mu) {
                    *x -= proj * m;
                }
                if normalize(&mut g) > 1e-9 {
                    break g;
                }
            };
            let (s, c) = angle.sin_cos();
            let mut r: Vec<f64> = mu.iter().zip(&u).map(|(m, o)| c * m + s * o).collect();
            normalize(&mut r);
            r
        })
        .collect()
}

/// Labeled stream for `spec`, generated around freshly drawn class means.
pub fn sample_stream<T: Scalar>(spec: &StreamSpec) -> Result<Vec<LabeledEmbedding<T>>> {
    spec.validate()?;
    let means = make_class_means(spec.num_classes, spec.dim, spec.seed, spec.min_separation)?;
    sample_stream_from_means(spec, &means)
}

fn sample_stream_from_means<T: Scalar>(
    spec: &StreamSpec,
    means: &[EmbeddingVector<f64>],
) -> Result<Vec<LabeledEmbedding<T>>> {
    let k = spec.num_classes;
    let d = spec.dim;
    let generating: Vec<Vec<f64>> = match spec.shift.rotation() {
        Some(angle) => rotate_means(means, angle, spec.seed),
        None => means.iter().map(|m| m.to_f64_vec()).collect(),
    };
    let confusion = spec.shift.confusion();
    let weights = spec.shift.label_weights();
    let mut labels = SplitMix64::stream(spec.seed, stream_id::LABELS);
    let mut confuse = SplitMix64::stream(spec.seed, stream_id::CONFUSION);
    let mut noise = SplitMix64::stream(spec.seed, stream_id::NOISE);
    let scale = spec.noise_scale / (d as f64).sqrt();
    let mut out = Vec::with_capacity(spec.num_samples);
    for _ in 0..spec.num_samples {
        let y = match weights {
            Some(w) => labels.categorical(w),
            None => labels.below(k as u64) as usize,
        };
        let z = match confusion {
            Some(matrix) => confuse.categorical(&matrix[y]),
            None => y,
        };
        let mean = &generating[z];
        let embedding = if spec.noise_scale == 0.0 {
            cast(mean)
        } else {
            let mut v: Vec<f64> = mean.iter().map(|m| m + scale * noise.normal()).collect();
            normalize(&mut v);
            cast(&v)
        };
        out.push(LabeledEmbedding::new(embedding, y as i32));
    }
    Ok(out)
}

/// Labels plus the class whose mean actually generated each sample.
/// Used to check confusion streams by counting.
pub fn sample_generating_classes(spec: &StreamSpec) -> Result<Vec<(usize, usize)>> {
    spec.validate()?;
    let k = spec.num_classes;
    let confusion = spec.shift.confusion();
    let weights = spec.shift.label_weights();
    let mut labels = SplitMix64::stream(spec.seed, stream_id::LABELS);
    let mut confuse = SplitMix64::stream(spec.seed, stream_id::CONFUSION);
    Ok((0..spec.num_samples)
        .map(|_| {
            let y = match weights {
                Some(w) => labels.categorical(w),
                None => labels.below(k as u64) as usize,
            };
            let z = match confusion {
                Some(matrix) => confuse.categorical(&matrix[y]),
                None => y,
            };
            (y, z)
        })
        .collect())
}
