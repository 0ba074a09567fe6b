//! Same-class Mixup with random scaling and additive Gaussian noise.
//!
//! Each augmented trace is `alpha * (lambda * x + (1 - lambda) * y) + eps`
//! where `x` is the source spectrum, `y` a partner of the same class,
//! `lambda ~ Beta(a, b)`, `alpha ~ U(low, high)` and `eps_j ~ N(0, sd^2)`.

use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::{self, StreamRng};
use crate::spectra::{Dataset, MixupOrigin, Spectrum};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AugmentConfig {
    pub beta_shape: (f64, f64),
    pub scale_range: (f64, f64),
    pub noise_sd: f64,
    pub copies_per_sample: usize,
    pub seed: u64,
}

impl Default for AugmentConfig {
    fn default() -> Self {
        AugmentConfig {
            beta_shape: (0.4, 0.4),
            scale_range: (0.9, 1.1),
            noise_sd: 0.05,
            copies_per_sample: 200,
            seed: 0,
        }
    }
}

impl AugmentConfig {
    pub fn validate(&self) -> Result<()> {
        let (a, b) = self.beta_shape;
        if !(a > 0.0 && b > 0.0 && a.is_finite() && b.is_finite()) {
            return Err(Error::Config(format!(
                "beta shape parameters must be positive, got ({a}, {b})"
            )));
        }
        let (lo, hi) = self.scale_range;
        // low == high pins the scale factor
        if !(lo > 0.0 && lo <= hi && hi.is_finite()) {
            return Err(Error::Config(format!(
                "scale range must satisfy 0 < low <= high, got ({lo}, {hi})"
            )));
        }
        if !(self.noise_sd >= 0.0 && self.noise_sd.is_finite()) {
            return Err(Error::Config(format!(
                "noise sd must be >= 0, got {}",
                self.noise_sd
            )));
        }
        Ok(())
    }
}

/// Gamma(shape, 1) by Marsaglia and Tsang, boosted for `shape < 1`.
fn sample_gamma(shape: f64, rng: &mut StreamRng) -> f64 {
    if shape < 1.0 {
        let u: f64 = rng.random();
        return sample_gamma(shape + 1.0, rng) * u.powf(1.0 / shape);
    }
    let d = shape - 1.0 / 3.0;
    let c = 1.0 / (9.0 * d).sqrt();
    loop {
        let x: f64 = rng.sample(StandardNormal);
        let v = 1.0 + c * x;
        if v <= 0.0 {
            continue;
        }
        let v = v * v * v;
        let u: f64 = rng.random();
        if u < 1.0 - 0.0331 * x.powi(4) || u.ln() < 0.5 * x * x + d * (1.0 - v + v.ln()) {
            return d * v;
        }
    }
}

/// Beta(a, b) draw as `g1 / (g1 + g2)` with independent Gamma variates.
pub fn sample_beta(shape: (f64, f64), rng: &mut StreamRng) -> f64 {
    loop {
        let g1 = sample_gamma(shape.0, rng);
        let g2 = sample_gamma(shape.1, rng);
        let sum = g1 + g2;
        if sum > 0.0 {
            return g1 / sum;
        }
    }
}

/// `n` independent draws from N(0, sd^2).
pub fn gaussian_noise(n: usize, sd: f64, rng: &mut StreamRng) -> Vec<f64> {
    (0..n)
        .map(|_| sd * rng.sample::<f64, _>(StandardNormal))
        .collect()
}

/// Elementwise `alpha * (lambda * x + (1 - lambda) * y) + noise`.
pub fn augment_pair(x: &[f64], y: &[f64], lambda: f64, alpha: f64, noise: &[f64]) -> Result<Vec<f64>> {
    if x.len() != y.len() || x.len() != noise.len() {
        return Err(Error::LengthMismatch(format!(
            "x has {}, y has {}, noise has {} values",
            x.len(),
            y.len(),
            noise.len()
        )));
    }
    let mu = 1.0 - lambda;
    Ok(x
        .iter()
        .zip(y)
        .zip(noise)
        .map(|((&a, &b), &e)| alpha * (lambda * a + mu * b) + e)
        .collect())
}

/// Appends `copies_per_sample` augmented records per original spectrum.
///
/// The partner is drawn uniformly among the other members of the same class
/// (the spectrum itself for singleton classes). Record `c` of original `i`
/// uses its own random stream, so the output is a pure function of the
/// input and the seed.
pub fn augment_dataset(train: &Dataset, cfg: &AugmentConfig) -> Result<Dataset> {
    cfg.validate()?;
    if cfg.copies_per_sample == 0 {
        return Ok(train.clone());
    }
    let labels = train.label_indices();
    let mut members: Vec<Vec<usize>> = vec![Vec::new(); train.num_classes()];
    for (i, &c) in labels.iter().enumerate() {
        members[c].push(i);
    }
    if let Some(empty) = members.iter().position(Vec::is_empty) {
        return Err(Error::EmptyClass(train.class_names[empty].clone()));
    }
    let copies = cfg.copies_per_sample;
    let augmented = (0..train.len() * copies)
        .into_par_iter()
        .map(|record| {
            let (i, copy) = (record / copies, record % copies);
            let source = &train.spectra[i];
            let mut rng = rng::stream(cfg.seed, record as u64);
            let class = &members[labels[i]];
            let partner = if class.len() == 1 {
                i
            } else {
                let pick = rng.random_range(0..class.len() - 1);
                let pos = class.iter().position(|&m| m == i).expect("member of own class");
                class[if pick >= pos { pick + 1 } else { pick }]
            };
            let lambda = sample_beta(cfg.beta_shape, &mut rng);
            let (lo, hi) = cfg.scale_range;
            let alpha = if hi > lo { rng.random_range(lo..hi) } else { lo };
            let noise = gaussian_noise(source.values.len(), cfg.noise_sd, &mut rng);
            let other = &train.spectra[partner];
            let values = augment_pair(&source.values, &other.values, lambda, alpha, &noise)?;
            Ok(Spectrum {
                id: format!("{}#aug{copy}", source.id),
                label: source.label.clone(),
                cohort: source.cohort.clone(),
                values,
                origin: Some(MixupOrigin {
                    parent_a: source.id.clone(),
                    parent_b: other.id.clone(),
                    lambda,
                    alpha,
                }),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let mut spectra = train.spectra.clone();
    spectra.extend(augmented);
    let mut out = train.with_spectra(spectra);
    out.provenance
        .insert("augment".into(), serde_json::to_value(cfg)?);
    Ok(out)
}

/// Checks that every augmented record names two parents present in
/// `parents` with its own label. Returns the offending record ids.
pub fn audit_partners(augmented: &Dataset, parents: &Dataset) -> Vec<String> {
    let label_of: std::collections::HashMap<&str, &str> = parents
        .spectra
        .iter()
        .map(|s| (s.id.as_str(), s.label.as_str()))
        .collect();
    augmented
        .spectra
        .iter()
        .filter_map(|s| {
            let o = s.origin.as_ref()?;
            let ok = [&o.parent_a, &o.parent_b]
                .iter()
                .all(|p| label_of.get(p.as_str()) == Some(&s.label.as_str()));
            (!ok).then(|| s.id.clone())
        })
        .collect()
}
