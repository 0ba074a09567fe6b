use std::collections::HashSet;

use rand::Rng;
use ropesat::augment::AugmentConfig;
use ropesat::eval::{
    aggregate, compute_metrics, cross_validate, make_splits, permute_labels, CvConfig, SplitMode,
};
use ropesat::model::{ModelConfig, TrainConfig};
use ropesat::rng::stream;
use ropesat::synthgen::{default_profiles, generate_cohort};
use ropesat::WavenumberGrid;

fn names(k: usize) -> Vec<String> {
    (0..k).map(|c| format!("c{c}")).collect()
}

fn one_hot(labels: &[usize], k: usize) -> Vec<Vec<f64>> {
    labels
        .iter()
        .map(|&y| (0..k).map(|c| if c == y { 1.0 } else { 0.0 }).collect())
        .collect()
}

#[test]
fn hand_counted_two_class_case() {
    // true [1,1,0,0], predicted [1,0,0,0]
    let probs = one_hot(&[1, 0, 0, 0], 2);
    let r = compute_metrics(&[1, 1, 0, 0], &probs, &names(2)).unwrap();
    assert_eq!(r.confusion, vec![vec![2, 0], vec![1, 1]]);
    let c1 = &r.per_class[1];
    assert_eq!((c1.tp, c1.fp, c1.tn, c1.fn_), (1, 0, 2, 1));
    assert_eq!(c1.sensitivity.value, Some(0.5));
    assert_eq!(c1.specificity.value, Some(1.0));
    assert_eq!(c1.precision.value, Some(1.0));
    assert!((c1.f1.value.unwrap() - 2.0 / 3.0).abs() < 1e-15);
    assert_eq!(r.accuracy, 0.75);
}

#[test]
fn hand_counted_three_class_case() {
    let truth = [0, 0, 0, 1, 1, 2, 2, 2];
    let pred = [0, 1, 0, 1, 2, 2, 2, 0];
    let r = compute_metrics(&truth, &one_hot(&pred, 3), &names(3)).unwrap();
    assert_eq!(r.confusion, vec![vec![2, 1, 0], vec![0, 1, 1], vec![1, 0, 2]]);
    let c2 = &r.per_class[2];
    assert_eq!((c2.tp, c2.fp, c2.tn, c2.fn_), (2, 1, 4, 1));
    assert_eq!(c2.sensitivity.value, Some(2.0 / 3.0));
    assert_eq!(c2.specificity.value, Some(0.8));
    assert_eq!(c2.precision.value, Some(2.0 / 3.0));
    assert_eq!(c2.f1.value, Some(4.0 / 6.0));
    let trace: usize = (0..3).map(|c| r.confusion[c][c]).sum();
    assert!((r.accuracy - trace as f64 / 8.0).abs() <= 1e-12);
    assert_eq!(r.confusion.iter().flatten().sum::<usize>(), 8);
}

#[test]
fn perfect_predictions_give_identity_confusion_and_unit_auc() {
    let truth: Vec<usize> = (0..30).map(|i| i / 10).collect();
    let r = compute_metrics(&truth, &one_hot(&truth, 3), &names(3)).unwrap();
    for c in 0..3 {
        assert_eq!(r.confusion[c][c], 10);
        let m = &r.per_class[c];
        for rate in [&m.sensitivity, &m.specificity, &m.precision, &m.f1, &m.auc] {
            assert_eq!(rate.value, Some(1.0));
        }
    }
}

#[test]
fn label_independent_scores_give_chance_auc() {
    let n = 10_000;
    let truth: Vec<usize> = (0..n).map(|i| i % 2).collect();
    let uniform = vec![vec![0.5, 0.5]; n];
    let r = compute_metrics(&truth, &uniform, &names(2)).unwrap();
    assert!((r.per_class[1].auc.value.unwrap() - 0.5).abs() <= 0.02);
    let mut rng = stream(8, 0);
    let random: Vec<Vec<f64>> = (0..n)
        .map(|_| {
            let p: f64 = rng.random();
            vec![1.0 - p, p]
        })
        .collect();
    let r = compute_metrics(&truth, &random, &names(2)).unwrap();
    assert!((r.per_class[1].auc.value.unwrap() - 0.5).abs() <= 0.02);
}

#[test]
fn auc_is_invariant_under_monotone_transforms() {
    let mut rng = stream(12, 0);
    let scores: Vec<f64> = (0..200).map(|_| rng.random()).collect();
    let truth: Vec<usize> = scores.iter().map(|&s| usize::from(s + rng.random::<f64>() * 0.8 > 0.9)).collect();
    let base = compute_metrics(&truth, &scores.iter().map(|&p| vec![1.0 - p, p]).collect::<Vec<_>>(), &names(2))
        .unwrap()
        .per_class[1]
        .auc
        .value
        .unwrap();
    let auc_of = |s: &[f64]| ropesat::eval::trapezoid_auc(&ropesat::eval::roc_curve(s, &truth.iter().map(|&y| y == 1).collect::<Vec<_>>()));
    let cubed: Vec<f64> = scores.iter().map(|s| s * s * s).collect();
    let logit: Vec<f64> = scores.iter().map(|s| (s / (1.0 - s)).ln()).collect();
    assert!((auc_of(&cubed) - base).abs() <= 1e-12);
    assert!((auc_of(&logit) - base).abs() <= 1e-12);
}

#[test]
fn kfold_splits_partition_the_cohort_with_balanced_folds() {
    let ds = generate_cohort(&default_profiles(), 34, &WavenumberGrid::fingerprint(), 1).unwrap();
    let plan = make_splits(&ds, SplitMode::Kfold5, 3).unwrap();
    assert_eq!(plan, make_splits(&ds, SplitMode::Kfold5, 3).unwrap());
    assert_ne!(plan, make_splits(&ds, SplitMode::Kfold5, 4).unwrap());
    let rounds = plan.rounds(&ds).unwrap();
    let mut seen = HashSet::new();
    for (train, test) in &rounds {
        assert_eq!(train.len() + test.len(), ds.len());
        assert!((20..=21).contains(&test.len()), "{}", test.len());
        for &i in test {
            assert!(seen.insert(i), "spectrum {i} in two test folds");
        }
        let train_set: HashSet<_> = train.iter().collect();
        assert!(test.iter().all(|i| !train_set.contains(i)));
    }
    assert_eq!(seen.len(), ds.len());
}

#[test]
fn holdout_keeps_a_fifth_of_each_class() {
    let ds = generate_cohort(&default_profiles(), 50, &WavenumberGrid::fingerprint(), 1).unwrap();
    let plan = make_splits(&ds, SplitMode::Holdout8020, 0).unwrap();
    let rounds = plan.rounds(&ds).unwrap();
    assert_eq!(rounds.len(), 1);
    let test = &rounds[0].1;
    assert_eq!(test.len(), 30);
    let labels = ds.label_indices();
    for c in 0..3 {
        assert_eq!(test.iter().filter(|&&i| labels[i] == c).count(), 10);
    }
}

#[test]
fn too_few_samples_per_class_is_rejected() {
    let ds = generate_cohort(&default_profiles(), 4, &WavenumberGrid::fingerprint(), 1).unwrap();
    assert!(matches!(
        make_splits(&ds, SplitMode::Kfold5, 0),
        Err(ropesat::Error::TooFewSamples(_))
    ));
}

fn small_cv() -> CvConfig {
    CvConfig {
        augment: AugmentConfig {
            copies_per_sample: 2,
            ..Default::default()
        },
        model: ModelConfig {
            embed_dim: 8,
            num_heads: 2,
            num_encoder_blocks: 1,
            head_conv_channels: 4,
            fc_hidden: 8,
            ..Default::default()
        },
        train: TrainConfig {
            epochs: 2,
            ..Default::default()
        },
        seed: 5,
        ..Default::default()
    }
}

#[test]
fn cross_validation_is_leak_free_and_bit_reproducible() {
    let ds = generate_cohort(&default_profiles(), 6, &WavenumberGrid::fingerprint(), 2).unwrap();
    let cfg = small_cv();
    let a = cross_validate(&cfg, &ds).unwrap();
    let b = cross_validate(&cfg, &ds).unwrap();
    assert_eq!(a.folds.len(), 5);
    assert_eq!(a.aggregate, b.aggregate);
    let mut tested = 0;
    for (fa, fb) in a.folds.iter().zip(&b.folds) {
        assert!(fa.leakage.is_empty());
        assert_eq!(fa.params.tensors, fb.params.tensors);
        assert_eq!(fa.curves, fb.curves);
        assert_eq!(fa.augmented_size, fa.train_size * 3);
        tested += fa.test.len();
        let rows: usize = fa.metrics.confusion.iter().flatten().sum();
        assert_eq!(rows, fa.test.len());
    }
    assert_eq!(tested, ds.len());
    let reports: Vec<_> = a.folds.iter().map(|f| f.metrics.clone()).collect();
    assert_eq!(aggregate(&reports), a.aggregate);
}

#[test]
fn cross_validation_rejects_augmented_input() {
    let ds = generate_cohort(&default_profiles(), 6, &WavenumberGrid::fingerprint(), 2).unwrap();
    let aug = ropesat::augment::augment_dataset(&ds, &AugmentConfig { copies_per_sample: 1, ..Default::default() }).unwrap();
    assert!(cross_validate(&small_cv(), &aug).is_err());
}

#[test]
fn permuted_labels_keep_class_counts() {
    let ds = generate_cohort(&default_profiles(), 10, &WavenumberGrid::fingerprint(), 2).unwrap();
    let p = permute_labels(&ds, 1);
    for c in &ds.class_names {
        let count = |d: &ropesat::Dataset| d.spectra.iter().filter(|s| &s.label == c).count();
        assert_eq!(count(&ds), count(&p));
    }
    assert!(ds.spectra.iter().zip(&p.spectra).any(|(a, b)| a.label != b.label));
}
