use rand::Rng;
use ropesat::explain::{
    class_overlap_report, grad_cam, grad_cam_batch, overlap_ratio, salient_regions, BandTable,
    DenominatorMode, SaliencyMap,
};
use ropesat::model::train::train;
use ropesat::model::{ModelConfig, TrainConfig};
use ropesat::preprocess::{preprocess_dataset, PreprocessConfig};
use ropesat::rng::stream;
use ropesat::synthgen::{default_profiles, generate_cohort, ClassProfile};
use ropesat::WavenumberGrid;

fn map(weights: Vec<f64>) -> SaliencyMap {
    SaliencyMap {
        grid: WavenumberGrid::new(1800.0, 900.0, weights.len()).unwrap(),
        weights,
        target_class: "a".into(),
        spectrum_id: "s".into(),
    }
}

fn random_map(rng: &mut ropesat::rng::StreamRng, n: usize) -> SaliencyMap {
    let mut w: Vec<f64> = (0..n).map(|_| rng.random::<f64>().powi(2)).collect();
    let max = w.iter().cloned().fold(0.0, f64::max);
    w.iter_mut().for_each(|x| *x /= max);
    map(w)
}

#[test]
fn regions_match_linear_scan_oracle() {
    let mut rng = stream(1, 0);
    for _ in 0..200 {
        let m = random_map(&mut rng, 60);
        let beta = rng.random_range(0.05..0.95);
        let mut want = Vec::new();
        let mut j = 0;
        while j < m.weights.len() {
            if m.weights[j] > beta {
                let s = j;
                while j + 1 < m.weights.len() && m.weights[j + 1] > beta {
                    j += 1;
                }
                want.push((s, j));
            }
            j += 1;
        }
        let got: Vec<(usize, usize)> = salient_regions(&m, beta).iter().map(|r| (r.first, r.last)).collect();
        assert_eq!(got, want);
    }
    let mut ind = vec![0.0; 40];
    ind[10..=20].iter_mut().for_each(|w| *w = 1.0);
    let r = salient_regions(&map(ind), 0.2);
    assert_eq!((r.len(), r[0].first, r[0].last), (1, 10, 20));
    let r = salient_regions(&map(vec![1.0; 40]), 0.5);
    assert_eq!((r.len(), r[0].first, r[0].last), (1, 0, 39));
}

#[test]
fn overlap_ratio_analytic_values() {
    // grid points at 1800, 1700, ..., 900; the band [1650, 1250] holds 1600..1300
    let mut w = vec![0.0; 10];
    w[2..6].copy_from_slice(&[0.1, 0.1, 0.9, 0.9]);
    let m = map(w);
    let band = (1650.0, 1250.0);
    let g = overlap_ratio(&m, band, 0.2, DenominatorMode::WeightsInBand).unwrap();
    assert!((g - 0.9).abs() < 1e-12);
    let g = overlap_ratio(&m, band, 0.2, DenominatorMode::BandMass).unwrap();
    assert!((g - 0.45).abs() < 1e-12);
    let ones = map(vec![1.0; 10]);
    for mode in [DenominatorMode::WeightsInBand, DenominatorMode::BandMass] {
        assert_eq!(overlap_ratio(&ones, band, 0.2, mode).unwrap(), 1.0);
    }
    assert!(overlap_ratio(&ones, (2000.0, 1900.0), 0.2, DenominatorMode::BandMass).is_err());
    assert_eq!(
        overlap_ratio(&map(vec![0.0; 10]), band, 0.2, DenominatorMode::WeightsInBand)
            .unwrap()
            .to_bits(),
        0.0f64.to_bits()
    );
}

#[test]
fn overlap_ratio_is_bounded_and_non_increasing_in_beta() {
    let mut rng = stream(2, 0);
    let bands = BandTable::default();
    for _ in 0..300 {
        let m = random_map(&mut rng, 219);
        for (_, band) in bands.iter() {
            for mode in [DenominatorMode::WeightsInBand, DenominatorMode::BandMass] {
                let mut prev = f64::INFINITY;
                for beta in [0.2, 0.3, 0.4, 0.5] {
                    let g = overlap_ratio(&m, band, beta, mode).unwrap();
                    assert!((0.0..=1.0).contains(&g));
                    assert!(g <= prev);
                    prev = g;
                }
            }
        }
    }
}

fn amide_iii_only_profiles() -> Vec<ClassProfile> {
    let base = default_profiles()[0].clone();
    let mut other = base.clone();
    other.label = "amide_iii_up".into();
    for p in &mut other.peak_specs {
        if (p.center_cm1 - 1240.0).abs() < 1.0 {
            p.amplitude_mean *= 2.0;
            p.amplitude_sd *= 2.0;
        }
    }
    vec![base, other]
}

fn small_model(input_length: usize) -> ModelConfig {
    ModelConfig {
        input_length,
        embed_dim: 16,
        num_heads: 2,
        num_encoder_blocks: 1,
        head_conv_channels: 8,
        fc_hidden: 16,
        num_classes: 2,
        seed: 3,
        ..Default::default()
    }
}

#[test]
fn saliency_concentrates_on_the_only_discriminative_band() {
    let grid = WavenumberGrid::fingerprint();
    let pre = PreprocessConfig::default();
    let train_ds = preprocess_dataset(&generate_cohort(&amide_iii_only_profiles(), 60, &grid, 1).unwrap(), &pre).unwrap();
    let test_ds = preprocess_dataset(&generate_cohort(&amide_iii_only_profiles(), 20, &grid, 2).unwrap(), &pre).unwrap();
    let cfg = TrainConfig { epochs: 50, ..Default::default() };
    let (params, _) = train(&small_model(train_ds.grid.points), &train_ds, None, &cfg).unwrap();
    let labels = test_ds.label_indices();
    let idx: Vec<usize> = (0..test_ds.len()).collect();
    let maps = grad_cam_batch(&params, &test_ds, &idx, &labels).unwrap();
    let (first, last) = test_ds.grid.index_range(1300.0, 1200.0).unwrap();
    let bands: Vec<(usize, usize)> = BandTable::default()
        .iter()
        .filter_map(|(_, (h, l))| test_ds.grid.index_range(h, l))
        .collect();
    let mut hits = 0;
    for m in &maps {
        assert!(m.weights.iter().all(|w| (0.0..=1.0).contains(w)));
        let inside = m.weights[first..=last].iter().sum::<f64>() / (last - first + 1) as f64;
        let outside: Vec<f64> = (0..m.weights.len())
            .filter(|j| !bands.iter().any(|&(a, b)| (a..=b).contains(j)))
            .map(|j| m.weights[j])
            .collect();
        let outside = outside.iter().sum::<f64>() / outside.len() as f64;
        hits += usize::from(inside > outside);
    }
    assert!(hits * 5 >= maps.len() * 4, "{hits} of {}", maps.len());

    let single = grad_cam(&params, &test_ds, 3, labels[3]).unwrap();
    assert_eq!(single.weights, maps[3].weights);
}

#[test]
fn zeroed_output_layer_gives_all_zero_maps() {
    let grid = WavenumberGrid::fingerprint();
    let ds = preprocess_dataset(&generate_cohort(&amide_iii_only_profiles(), 3, &grid, 1).unwrap(), &PreprocessConfig::default()).unwrap();
    let mut params = ropesat::model::ModelParams::init(&small_model(ds.grid.points)).unwrap();
    params.zero_final_layer();
    for i in 0..ds.len() {
        let m = grad_cam(&params, &ds, i, 0).unwrap();
        assert!(m.weights.iter().all(|&w| w == 0.0));
    }
}

#[test]
fn class_report_is_bounded_and_shaped() {
    let grid = WavenumberGrid::fingerprint();
    let pre = PreprocessConfig::default();
    let ds = preprocess_dataset(&generate_cohort(&amide_iii_only_profiles(), 20, &grid, 4).unwrap(), &pre).unwrap();
    let (params, _) = train(&small_model(ds.grid.points), &ds, None, &TrainConfig { epochs: 5, ..Default::default() }).unwrap();
    let bands = BandTable::default();
    let betas = [0.2, 0.3, 0.4, 0.5];
    let report = class_overlap_report(&params, &ds, &bands, &betas, DenominatorMode::WeightsInBand).unwrap();
    let classes = report.class_maps.len();
    assert_eq!(classes + report.skipped.len(), 2);
    assert_eq!(report.rows.len(), classes * bands.len() * betas.len());
    for r in &report.rows {
        assert!((0.0..=1.0).contains(&r.gamma));
    }
    let csv = report.to_csv();
    assert_eq!(csv.lines().count(), 1 + report.rows.len());
    assert!(class_overlap_report(&params, &ds, &bands, &[0.0], DenominatorMode::BandMass).is_err());
}
