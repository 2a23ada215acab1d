use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Logit scale applied to cosine similarities before the softmax.
pub const DEFAULT_TEMPERATURE: f64 = 100.0;

/// Named hyperparameter bundles `(tau, n1, n2)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Preset {
    /// Natural-distribution-shift setting: `0.3 / 30000 / 10`.
    Ood,
    /// Cross-domain setting: `0.35 / 50000 / 10`.
    CrossDomain,
}

impl Preset {
    pub fn tau(self) -> f64 {
        match self {
            Preset::Ood => 0.3,
            Preset::CrossDomain => 0.35,
        }
    }

    pub fn n1(self) -> u64 {
        match self {
            Preset::Ood => 30_000,
            Preset::CrossDomain => 50_000,
        }
    }

    pub fn n2(self) -> u64 {
        10
    }

    pub fn name(self) -> &'static str {
        match self {
            Preset::Ood => "ood",
            Preset::CrossDomain => "crossdomain",
        }
    }
}

impl std::str::FromStr for Preset {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "ood" => Ok(Preset::Ood),
            "crossdomain" | "cross-domain" => Ok(Preset::CrossDomain),
            other => Err(Error::InvalidConfig(format!("unknown preset `{other}`"))),
        }
    }
}

/// Shape and hyperparameters of an adapter.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AdapterConfig {
    /// `M`, the number of class embeddings.
    pub num_embeddings: usize,
    /// `K`, the number of classes. Embedding `m` belongs to class `m % K`.
    pub num_classes: usize,
    /// `d`, the embedding dimension.
    pub dim: usize,
    /// Membership probability that must be exceeded (strictly) to adapt.
    pub tau: f64,
    /// Initial value of the embedding counters.
    pub n1: u64,
    /// Initial value of the prior counters.
    pub n2: u64,
    pub temperature: f64,
}

impl AdapterConfig {
    /// A config with the `ood` preset and the default temperature.
    pub fn new(num_embeddings: usize, num_classes: usize, dim: usize) -> Self {
        Self::with_preset(num_embeddings, num_classes, dim, Preset::Ood)
    }

    pub fn with_preset(num_embeddings: usize, num_classes: usize, dim: usize, preset: Preset) -> Self {
        Self {
            num_embeddings,
            num_classes,
            dim,
            tau: preset.tau(),
            n1: preset.n1(),
            n2: preset.n2(),
            temperature: DEFAULT_TEMPERATURE,
        }
    }

    pub fn tau(mut self, tau: f64) -> Self {
        self.tau = tau;
        self
    }

    pub fn counts(mut self, n1: u64, n2: u64) -> Self {
        self.n1 = n1;
        self.n2 = n2;
        self
    }

    pub fn temperature(mut self, temperature: f64) -> Self {
        self.temperature = temperature;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.num_classes == 0 {
            return Err(Error::InvalidConfig("num_classes must be positive".into()));
        }
        if self.dim == 0 {
            return Err(Error::InvalidConfig("dim must be positive".into()));
        }
        if self.num_embeddings < self.num_classes {
            return Err(Error::TooFewEmbeddings { m: self.num_embeddings, k: self.num_classes });
        }
        if !(0.0..=1.0).contains(&self.tau) {
            return Err(Error::InvalidConfig(format!("tau must lie in [0, 1], got {}", self.tau)));
        }
        if !(self.temperature.is_finite() && self.temperature > 0.0) {
            return Err(Error::InvalidConfig(format!(
                "temperature must be positive and finite, got {}",
                self.temperature
            )));
        }
        Ok(())
    }

    pub fn class_of(&self, m: usize) -> usize {
        m % self.num_classes
    }
}
