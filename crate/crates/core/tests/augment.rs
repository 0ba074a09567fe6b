use std::collections::HashMap;

use ropesat::augment::{audit_partners, augment_dataset, augment_pair, sample_beta, AugmentConfig};
use ropesat::rng::stream;
use ropesat::synthgen::{default_profiles, generate_cohort};
use ropesat::WavenumberGrid;

fn cohort(n: usize) -> ropesat::Dataset {
    generate_cohort(&default_profiles(), n, &WavenumberGrid::fingerprint(), 9).unwrap()
}

/// Replays each record's random stream (partner pick, lambda, alpha, noise)
/// and rebuilds the row with a plain loop.
#[test]
fn augmented_rows_match_elementwise_oracle_bit_for_bit() {
    use rand::Rng;
    use rand_distr::StandardNormal;
    let ds = cohort(4);
    let cfg = AugmentConfig {
        copies_per_sample: 3,
        seed: 17,
        ..Default::default()
    };
    let out = augment_dataset(&ds, &cfg).unwrap();
    let labels = ds.label_indices();
    for (record, s) in out.spectra[ds.len()..].iter().enumerate() {
        let i = record / 3;
        let mut rng = stream(cfg.seed, record as u64);
        let mates: Vec<usize> = (0..ds.len()).filter(|&m| labels[m] == labels[i] && m != i).collect();
        let partner = mates[rng.random_range(0..mates.len())];
        let lambda = sample_beta(cfg.beta_shape, &mut rng);
        let alpha = rng.random_range(cfg.scale_range.0..cfg.scale_range.1);
        let (x, y) = (&ds.spectra[i].values, &ds.spectra[partner].values);
        let o = s.origin.as_ref().unwrap();
        assert_eq!((o.parent_a.as_str(), o.parent_b.as_str()), (ds.spectra[i].id.as_str(), ds.spectra[partner].id.as_str()));
        assert_eq!((o.lambda, o.alpha), (lambda, alpha));
        for j in 0..x.len() {
            let eps = cfg.noise_sd * rng.sample::<f64, _>(StandardNormal);
            let want = alpha * (lambda * x[j] + (1.0 - lambda) * y[j]) + eps;
            assert_eq!(s.values[j].to_bits(), want.to_bits());
        }
    }
}

#[test]
fn augment_pair_equals_loop_oracle() {
    let mut rng = stream(4, 4);
    use rand::Rng;
    for _ in 0..100 {
        let n = 37;
        let x: Vec<f64> = (0..n).map(|_| rng.random_range(-2.0..2.0)).collect();
        let y: Vec<f64> = (0..n).map(|_| rng.random_range(-2.0..2.0)).collect();
        let e: Vec<f64> = (0..n).map(|_| rng.random_range(-0.1..0.1)).collect();
        let lambda: f64 = rng.random();
        let alpha = rng.random_range(0.9..1.1);
        let got = augment_pair(&x, &y, lambda, alpha, &e).unwrap();
        for j in 0..n {
            let want = alpha * (lambda * x[j] + (1.0 - lambda) * y[j]) + e[j];
            assert_eq!(got[j].to_bits(), want.to_bits());
        }
    }
}

#[test]
fn partners_share_the_label_and_expansion_is_exact() {
    let ds = cohort(10);
    let out = augment_dataset(&ds, &AugmentConfig::default()).unwrap();
    assert_eq!(out.len(), 30 + 30 * 200);
    assert!(audit_partners(&out, &ds).is_empty());
    let labels: HashMap<&str, &str> = ds.spectra.iter().map(|s| (s.id.as_str(), s.label.as_str())).collect();
    for s in &out.spectra[30..] {
        let o = s.origin.as_ref().unwrap();
        assert_eq!(labels[o.parent_a.as_str()], s.label);
        assert_eq!(labels[o.parent_b.as_str()], s.label);
        assert_ne!(o.parent_a, o.parent_b);
    }
}

#[test]
fn audit_flags_cross_class_and_foreign_parents() {
    let ds = cohort(3);
    let mut out = augment_dataset(&ds, &AugmentConfig { copies_per_sample: 1, ..Default::default() }).unwrap();
    let last = out.spectra.len() - 1;
    out.spectra[last].origin.as_mut().unwrap().parent_b = ds.spectra[0].id.clone();
    out.spectra[last - 1].origin.as_mut().unwrap().parent_a = "not-in-train".into();
    let flagged = audit_partners(&out, &ds);
    assert_eq!(flagged.len(), 2);
}

#[test]
fn beta_moments_and_u_shape() {
    let mut rng = stream(2024, 0);
    let n = 100_000;
    let draws: Vec<f64> = (0..n).map(|_| sample_beta((0.4, 0.4), &mut rng)).collect();
    let mean = draws.iter().sum::<f64>() / n as f64;
    let var = draws.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / n as f64;
    let (a, b) = (0.4, 0.4);
    let want_var = a * b / ((a + b) * (a + b) * (a + b + 1.0));
    assert!((mean - 0.5).abs() <= 0.01, "{mean}");
    assert!((var - want_var).abs() <= 0.005, "{var} vs {want_var}");
    let tails = draws.iter().filter(|&&x| x <= 0.1 || x >= 0.9).count();
    let middle = draws.iter().filter(|&&x| (0.45..=0.55).contains(&x)).count();
    assert!(tails > middle);
    assert!(draws.iter().all(|x| (0.0..=1.0).contains(x)));
}

#[test]
fn same_seed_gives_identical_output_and_new_seed_differs() {
    let ds = cohort(5);
    let cfg = AugmentConfig {
        copies_per_sample: 4,
        seed: 3,
        ..Default::default()
    };
    let a = augment_dataset(&ds, &cfg).unwrap();
    let b = augment_dataset(&ds, &cfg).unwrap();
    assert_eq!(a, b);
    let c = augment_dataset(&ds, &AugmentConfig { seed: 4, ..cfg }).unwrap();
    assert_ne!(a.spectra, c.spectra);
}
