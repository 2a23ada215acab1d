//! Directional shift experiments shared by the fixture generator and the
//! acceptance suite.

#![allow(dead_code)]

use bca::synthgen::{ShiftModel, StreamSpec};

pub const SEEDS: std::ops::RangeInclusive<u64> = 1..=20;

pub const NUM_CLASSES: usize = 10;
pub const DIM: usize = 64;
pub const NUM_SAMPLES: usize = 10_000;
pub const CONFUSION_DIAGONAL: f64 = 0.7;

pub struct Experiment {
    pub name: &'static str,
    pub templates_per_class: usize,
    pub text_perturbation: f64,
    pub noise_scale: f64,
    pub rotation: Option<f64>,
    pub confusion: bool,
    pub tau: f64,
    pub n1: u64,
    pub n2: u64,
    pub temperature: f64,
}

impl Experiment {
    pub fn spec(&self, seed: u64) -> StreamSpec {
        let mut spec = StreamSpec::new(NUM_CLASSES, DIM, NUM_SAMPLES, seed);
        spec.templates_per_class = self.templates_per_class;
        spec.text_perturbation = self.text_perturbation;
        spec.noise_scale = self.noise_scale;
        let mut parts = Vec::new();
        if let Some(angle) = self.rotation {
            parts.push(ShiftModel::MeanRotation { angle });
        }
        if self.confusion {
            parts.push(ShiftModel::confusion_with_diagonal(NUM_CLASSES, CONFUSION_DIAGONAL));
        }
        spec.shift = match parts.len() {
            0 => ShiftModel::None,
            1 => parts.pop().unwrap(),
            _ => ShiftModel::Combined { parts },
        };
        spec
    }
}

pub const CONFUSION: Experiment = Experiment {
    name: "confusion",
    templates_per_class: 6,
    text_perturbation: 3.0,
    noise_scale: 1.0,
    rotation: None,
    confusion: true,
    tau: 0.2,
    n1: 100,
    n2: 5,
    temperature: 30.0,
};

pub const ROTATION: Experiment = Experiment {
    name: "rotation",
    templates_per_class: 4,
    text_perturbation: 1.0,
    noise_scale: 1.0,
    rotation: Some(1.2),
    confusion: false,
    tau: 0.2,
    n1: 100,
    n2: 5,
    temperature: 30.0,
};

pub const COMBINED: Experiment = Experiment {
    name: "combined",
    templates_per_class: 4,
    text_perturbation: 2.0,
    noise_scale: 1.0,
    rotation: Some(0.8),
    confusion: true,
    tau: 0.2,
    n1: 100,
    n2: 5,
    temperature: 30.0,
};

pub fn all() -> [&'static Experiment; 3] {
    [&CONFUSION, &ROTATION, &COMBINED]
}
