use ropesat::model::train::{curves_csv, train, train_from, TrainConfig};
use ropesat::model::{predict, ModelConfig, ModelParams};
use ropesat::preprocess::{preprocess_dataset, PreprocessConfig};
use ropesat::synthgen::{default_profiles, generate_cohort};
use ropesat::{Dataset, WavenumberGrid};

/// The base profile against a copy whose strongest peak is tripled.
fn two_class(n: usize, seed: u64) -> Dataset {
    let base = default_profiles()[0].clone();
    let mut strong = base.clone();
    strong.label = "strong".into();
    let top = strong
        .peak_specs
        .iter_mut()
        .max_by(|a, b| a.amplitude_mean.total_cmp(&b.amplitude_mean))
        .unwrap();
    top.amplitude_mean *= 3.0;
    let profiles = vec![base, strong];
    let raw = generate_cohort(&profiles, n, &WavenumberGrid::fingerprint(), seed).unwrap();
    preprocess_dataset(&raw, &PreprocessConfig::default()).unwrap()
}

fn model(ds: &Dataset) -> ModelConfig {
    ModelConfig {
        input_length: ds.grid.points,
        embed_dim: 16,
        num_heads: 2,
        num_encoder_blocks: 1,
        head_conv_channels: 8,
        fc_hidden: 16,
        num_classes: ds.num_classes(),
        seed: 1,
        ..Default::default()
    }
}

#[test]
fn separable_two_class_cohort_is_learned_within_twenty_epochs() {
    let train_ds = two_class(40, 1);
    let val = two_class(20, 2);
    let cfg = TrainConfig {
        epochs: 20,
        ..Default::default()
    };
    let (_, curves) = train(&model(&train_ds), &train_ds, Some(&val), &cfg).unwrap();
    assert_eq!(curves.len(), 20);
    let best = curves.iter().filter_map(|c| c.val_acc).fold(0.0, f64::max);
    assert!(best >= 0.99, "best validation accuracy {best}");
}

#[test]
fn zero_learning_rate_leaves_parameters_unchanged() {
    let ds = two_class(10, 3);
    let init = ModelParams::init(&model(&ds)).unwrap();
    let cfg = TrainConfig {
        learning_rate: 0.0,
        epochs: 3,
        batch_size: 8,
        ..Default::default()
    };
    let (after, _) = train_from(init.clone(), &ds, None, &cfg).unwrap();
    for (name, t) in &init.tensors {
        let u = &after.tensors[name];
        assert!(t.data.iter().zip(&u.data).all(|(a, b)| a.to_bits() == b.to_bits()), "{name}");
    }
}

#[test]
fn same_seed_gives_identical_curve_files() {
    let ds = two_class(10, 4);
    let cfg = TrainConfig {
        epochs: 3,
        batch_size: 8,
        seed: 9,
        ..Default::default()
    };
    let (pa, ca) = train(&model(&ds), &ds, Some(&ds), &cfg).unwrap();
    let (pb, cb) = train(&model(&ds), &ds, Some(&ds), &cfg).unwrap();
    assert_eq!(curves_csv(&ca), curves_csv(&cb));
    assert_eq!(pa.tensors, pb.tensors);
    assert_eq!(pa.running_var, pb.running_var);
    let (_, cc) = train(&model(&ds), &ds, Some(&ds), &TrainConfig { seed: 10, ..cfg }).unwrap();
    assert_ne!(curves_csv(&ca), curves_csv(&cc));
}

#[test]
fn predictions_are_probability_rows_and_shift_invariant() {
    let ds = two_class(6, 5);
    let mut params = ModelParams::init(&model(&ds)).unwrap();
    let before = predict(&params, &ds).unwrap();
    for row in &before {
        assert!((row.iter().sum::<f64>() - 1.0).abs() <= 1e-9);
        assert!(row.iter().all(|p| (0.0..=1.0).contains(p)));
    }
    // adding a constant to every logit shifts the output bias uniformly
    params.tensors.get_mut("fc2.bias").unwrap().data.iter_mut().for_each(|b| *b += 3.5);
    let after = predict(&params, &ds).unwrap();
    for (a, b) in before.iter().zip(&after) {
        for (x, y) in a.iter().zip(b) {
            assert!((x - y).abs() <= 1e-12);
        }
    }
}

#[test]
fn mismatched_datasets_are_rejected() {
    let ds = two_class(5, 6);
    let mut cfg = model(&ds);
    cfg.input_length += 1;
    assert!(train(&cfg, &ds, None, &TrainConfig::default()).is_err());
    let three = preprocess_dataset(
        &generate_cohort(&default_profiles(), 5, &WavenumberGrid::fingerprint(), 1).unwrap(),
        &PreprocessConfig::default(),
    )
    .unwrap();
    assert!(train(&model(&ds), &ds, Some(&three), &TrainConfig::default()).is_err());
}
