use super::oracle::*;
use super::*;
use crate::error::Error;

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

#[test]
fn two_means_at_max_separation_are_antipodal() {
    let m = make_class_means(2, 2, 3, 2.0).unwrap();
    assert!((dot(m[0].as_slice(), m[1].as_slice()) + 1.0).abs() < 1e-12);
}

#[test]
fn means_are_deterministic_unit_and_separated() {
    let a = make_class_means(10, 64, 42, 0.5).unwrap();
    let b = make_class_means(10, 64, 42, 0.5).unwrap();
    assert_eq!(a, b);
    for (i, m) in a.iter().enumerate() {
        assert!((m.norm() - 1.0).abs() < 1e-9);
        for other in &a[..i] {
            assert!(dot(m.as_slice(), other.as_slice()) <= 0.5);
        }
    }
    assert_ne!(a, make_class_means(10, 64, 43, 0.5).unwrap());
}

#[test]
fn infeasible_separation_is_reported() {
    assert!(matches!(make_class_means(50, 2, 1, 1.5), Err(Error::SeparationInfeasible { k: 50, .. })));
    assert!(make_class_means(3, 8, 1, 2.5).is_err());
}

#[test]
fn text_embeddings_without_perturbation_equal_means() {
    let means = make_class_means(4, 16, 1, 0.5).unwrap();
    let text = make_text_embeddings::<f64>(&means, 1, 0.0, 1).unwrap();
    assert_eq!(text, means);
}

#[test]
fn text_embeddings_follow_template_blocks() {
    let means = make_class_means(4, 32, 5, 0.5).unwrap();
    let text = make_text_embeddings::<f64>(&means, 3, 0.3, 5).unwrap();
    assert_eq!(text.len(), 12);
    for (m, row) in text.iter().enumerate() {
        assert!((row.norm() - 1.0).abs() < 1e-9);
        let nearest = (0..4)
            .max_by(|&a, &b| {
                dot(row.as_slice(), means[a].as_slice()).partial_cmp(&dot(row.as_slice(), means[b].as_slice())).unwrap()
            })
            .unwrap();
        assert_eq!(nearest, m % 4, "row {m}");
    }
}

#[test]
fn noiseless_unshifted_samples_sit_on_means() {
    let mut spec = StreamSpec::new(3, 8, 50, 11);
    spec.noise_scale = 0.0;
    let task = generate::<f64>(&spec).unwrap();
    for s in &task.stream {
        assert_eq!(s.embedding, task.means[s.label as usize]);
    }
}

#[test]
fn identity_confusion_matches_unshifted_stream() {
    let spec = StreamSpec::new(5, 16, 500, 21);
    let mut confused = spec.clone();
    confused.shift = ShiftModel::confusion_with_diagonal(5, 1.0);
    assert_eq!(sample_stream::<f64>(&spec).unwrap(), sample_stream::<f64>(&confused).unwrap());
}

#[test]
fn label_skew_frequencies() {
    let mut spec = StreamSpec::new(2, 8, 10_000, 5);
    spec.shift = ShiftModel::LabelSkew { weights: vec![3.0, 1.0] };
    let stream = sample_stream::<f32>(&spec).unwrap();
    let zeros = stream.iter().filter(|s| s.label == 0).count() as f64 / 10_000.0;
    assert!((zeros - 0.75).abs() < 0.02, "{zeros}");
}

#[test]
fn confusion_rows_recovered_by_counting() {
    let k = 10;
    let mut spec = StreamSpec::new(k, 16, 10_000, 8);
    spec.shift = ShiftModel::confusion_with_diagonal(k, 0.7);
    let pairs = sample_generating_classes(&spec).unwrap();
    let mut counts = vec![vec![0.0; k]; k];
    for &(y, z) in &pairs {
        counts[y][z] += 1.0;
    }
    let ShiftModel::Confusion { matrix } = &spec.shift else { unreachable!() };
    for y in 0..k {
        let total: f64 = counts[y].iter().sum();
        for z in 0..k {
            assert!((counts[y][z] / total - matrix[y][z]).abs() < 0.05);
        }
    }
    // The generating classes agree with the embeddings of a noiseless stream.
    spec.noise_scale = 0.0;
    let task = generate::<f64>(&spec).unwrap();
    for (s, &(y, z)) in task.stream.iter().zip(&pairs) {
        assert_eq!(s.label as usize, y);
        assert_eq!(s.embedding, task.means[z]);
    }
}

#[test]
fn rotation_moves_means_by_angle() {
    let mut spec = StreamSpec::new(4, 16, 40, 2);
    spec.noise_scale = 0.0;
    spec.shift = ShiftModel::MeanRotation { angle: 0.5 };
    let task = generate::<f64>(&spec).unwrap();
    for s in &task.stream {
        let c = dot(s.embedding.as_slice(), task.means[s.label as usize].as_slice());
        assert!((c - 0.5f64.cos()).abs() < 1e-9);
    }
}

#[test]
fn streams_are_deterministic_and_unit() {
    let mut spec = StreamSpec::new(6, 32, 300, 77);
    spec.templates_per_class = 2;
    spec.text_perturbation = 0.5;
    spec.shift = ShiftModel::Combined {
        parts: vec![ShiftModel::MeanRotation { angle: 0.3 }, ShiftModel::confusion_with_diagonal(6, 0.8)],
    };
    let a = generate::<f64>(&spec).unwrap();
    let b = generate::<f64>(&spec).unwrap();
    assert_eq!(a.stream, b.stream);
    assert_eq!(a.text_embeddings, b.text_embeddings);
    assert!(a.stream.iter().all(|s| (s.embedding.norm() - 1.0).abs() < 1e-9));
    assert!(a.stream.iter().all(|s| (0..6).contains(&s.label)));
}

#[test]
fn spec_validation() {
    let ok = StreamSpec::new(3, 4, 10, 0);
    let mut s = ok.clone();
    s.num_samples = 0;
    assert!(matches!(s.validate(), Err(Error::InvalidSpec { field: "num_samples", .. })));
    let mut s = ok.clone();
    s.dim = 1;
    assert!(matches!(s.validate(), Err(Error::InvalidSpec { field: "dim", .. })));
    let mut s = ok.clone();
    s.num_classes = 1;
    assert!(s.validate().is_err());
    let mut s = ok.clone();
    s.shift = ShiftModel::Confusion { matrix: vec![vec![0.5, 0.4, 0.0]; 3] };
    assert!(matches!(s.validate(), Err(Error::InvalidSpec { field: "shift", .. })));
    let mut s = ok.clone();
    s.shift = ShiftModel::LabelSkew { weights: vec![0.0; 3] };
    assert!(s.validate().is_err());
    let mut s = ok;
    s.shift = ShiftModel::Combined {
        parts: vec![ShiftModel::MeanRotation { angle: 0.1 }, ShiftModel::MeanRotation { angle: 0.2 }],
    };
    assert!(s.validate().is_err());
}

#[test]
fn spec_json_round_trip() {
    let mut spec = StreamSpec::new(3, 4, 10, 9);
    spec.shift = ShiftModel::Combined {
        parts: vec![ShiftModel::MeanRotation { angle: 0.1 }, ShiftModel::LabelSkew { weights: vec![1.0, 2.0, 3.0] }],
    };
    let json = serde_json::to_string(&spec).unwrap();
    assert_eq!(serde_json::from_str::<StreamSpec>(&json).unwrap(), spec);
}

#[test]
fn oracle_single_component_returns_its_prior() {
    let bank = vec![vec![1.0, 0.0]];
    let priors = vec![vec![0.25, 0.75]];
    assert_eq!(oracle_posterior(&bank, &priors, &[0.6, 0.8], 100.0), vec![0.25, 0.75]);
}

#[test]
fn oracle_one_hot_matches_zero_shot() {
    let text = vec![vec![1.0, 0.0], vec![0.0, 1.0], vec![0.6, 0.8]];
    let priors = vec![vec![1.0, 0.0, 0.0], vec![0.0, 1.0, 0.0], vec![0.0, 0.0, 1.0]];
    let f = [0.8, 0.6];
    let a = oracle_posterior(&text, &priors, &f, 10.0);
    let b = oracle_zero_shot(&text, &f, 10.0);
    for (x, y) in a.iter().zip(&b) {
        assert!((x - y).abs() < 1e-12);
    }
}

#[test]
fn running_state_oracles_agree_on_single_update() {
    let bank = vec![vec![1.0, 0.0], vec![0.0, 1.0]];
    let priors = vec![vec![1.0, 0.0], vec![0.0, 1.0]];
    let ups = vec![RecordedUpdate { index: 0, embedding: vec![0.0, 1.0], posterior: vec![0.7, 0.3] }];
    let (b1, p1) = oracle_running_state(&bank, &priors, 2, 10, &ups);
    let (b2, p2) = oracle_replay(&bank, &priors, 2, 10, &ups);
    let e = [2.0 / 5f64.sqrt(), 1.0 / 5f64.sqrt()];
    for i in 0..2 {
        assert!((b1[0][i] - e[i]).abs() < 1e-12 && (b2[0][i] - e[i]).abs() < 1e-12);
    }
    assert!((p1[0][0] - 10.7 / 11.0).abs() < 1e-12 && (p2[0][0] - 10.7 / 11.0).abs() < 1e-12);
    assert_eq!(b1[1], bank[1]);
    assert_eq!(p1[1], priors[1]);
}

#[test]
fn running_state_with_no_updates_is_initial() {
    let bank = vec![vec![1.0, 0.0]];
    let priors = vec![vec![1.0]];
    assert_eq!(oracle_running_state(&bank, &priors, 5, 5, &[]), (bank.clone(), priors.clone()));
}

#[test]
fn last_half_uses_ceiling() {
    assert_eq!(last_half_accuracy(&[false, false, true, true, false]), 0.5);
    assert_eq!(last_half_accuracy(&[false, true]), 1.0);
}
