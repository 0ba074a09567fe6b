//! Class-conditional synthetic absorbance spectra.
//!
//! A spectrum is `m * sum_p a_p * exp(-(w - c_p)^2 / (2 s_p^2)) + drift + noise`
//! where the amplitudes `a_p` are drawn per spectrum, `m` is a log-normal
//! multiplicative scatter factor, `drift` is a linear baseline tilt plus an
//! optional offset and `noise` is white Gaussian noise. Peak widths are
//! Gaussian standard deviations in cm-1.

use std::path::Path;

use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng;
use crate::spectra::{Dataset, Provenance, Spectrum, WavenumberGrid};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PeakSpec {
    pub center_cm1: f64,
    pub width_cm1: f64,
    pub amplitude_mean: f64,
    pub amplitude_sd: f64,
}

impl PeakSpec {
    pub fn new(center_cm1: f64, width_cm1: f64, amplitude_mean: f64, amplitude_sd: f64) -> Self {
        PeakSpec {
            center_cm1,
            width_cm1,
            amplitude_mean,
            amplitude_sd,
        }
    }

    pub fn shape(&self, cm1: f64) -> f64 {
        let z = (cm1 - self.center_cm1) / self.width_cm1;
        (-0.5 * z * z).exp()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassProfile {
    pub label: String,
    pub peak_specs: Vec<PeakSpec>,
    pub baseline_slope_sd: f64,
    pub scatter_scale_sd: f64,
    pub noise_sd: f64,
    #[serde(default)]
    pub baseline_offset_sd: f64,
}

impl ClassProfile {
    fn validate(&self, grid: &WavenumberGrid) -> Result<()> {
        let bad = |msg: String| Err(Error::Config(format!("profile `{}`: {msg}", self.label)));
        for p in &self.peak_specs {
            if !(p.width_cm1 > 0.0) {
                return bad(format!("peak at {} has width {}", p.center_cm1, p.width_cm1));
            }
            if p.center_cm1 > grid.start_cm1 || p.center_cm1 < grid.end_cm1 {
                return bad(format!(
                    "peak center {} outside grid [{}, {}]",
                    p.center_cm1, grid.end_cm1, grid.start_cm1
                ));
            }
            if !(p.amplitude_sd >= 0.0) {
                return bad(format!("peak at {} has negative amplitude sd", p.center_cm1));
            }
        }
        for (name, v) in [
            ("baseline_slope_sd", self.baseline_slope_sd),
            ("scatter_scale_sd", self.scatter_scale_sd),
            ("noise_sd", self.noise_sd),
            ("baseline_offset_sd", self.baseline_offset_sd),
        ] {
            if !(v >= 0.0 && v.is_finite()) {
                return bad(format!("{name} must be >= 0, got {v}"));
            }
        }
        Ok(())
    }

    /// Noise-free trace with every amplitude at its mean.
    pub fn mean_spectrum(&self, grid: &WavenumberGrid) -> Vec<f64> {
        let amps: Vec<f64> = self.peak_specs.iter().map(|p| p.amplitude_mean).collect();
        peak_sum(&self.peak_specs, &amps, grid)
    }
}

/// Nuisance draws applied on top of the peak sum.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Nuisance {
    pub scatter: f64,
    pub slope: f64,
    pub offset: f64,
}

impl Nuisance {
    pub const NONE: Nuisance = Nuisance {
        scatter: 1.0,
        slope: 0.0,
        offset: 0.0,
    };

    /// `scatter * clean + offset + slope * x`, with `x` running from -1 at the
    /// first grid point to +1 at the last.
    pub fn apply(&self, clean: &[f64]) -> Vec<f64> {
        let n = clean.len();
        clean
            .iter()
            .enumerate()
            .map(|(j, v)| {
                let x = 2.0 * j as f64 / (n - 1) as f64 - 1.0;
                self.scatter * v + self.offset + self.slope * x
            })
            .collect()
    }
}

pub fn peak_sum(peaks: &[PeakSpec], amplitudes: &[f64], grid: &WavenumberGrid) -> Vec<f64> {
    grid.wavenumbers()
        .iter()
        .map(|&w| peaks.iter().zip(amplitudes).map(|(p, a)| a * p.shape(w)).sum())
        .collect()
}

/// Generates `n_per_class` spectra per profile, class by class.
pub fn generate_cohort(
    profiles: &[ClassProfile],
    n_per_class: usize,
    grid: &WavenumberGrid,
    seed: u64,
) -> Result<Dataset> {
    grid.validate()?;
    if profiles.is_empty() {
        return Err(Error::Config("no class profiles given".into()));
    }
    if n_per_class == 0 {
        return Err(Error::Config("n_per_class must be at least 1".into()));
    }
    let mut class_names: Vec<String> = Vec::new();
    for p in profiles {
        p.validate(grid)?;
        if class_names.contains(&p.label) {
            return Err(Error::Config(format!("duplicate profile label `{}`", p.label)));
        }
        class_names.push(p.label.clone());
    }
    let spectra: Vec<Spectrum> = (0..profiles.len() * n_per_class)
        .into_par_iter()
        .map(|record| {
            let profile = &profiles[record / n_per_class];
            let mut rng = rng::stream(seed, record as u64);
            let normal = |rng: &mut rng::StreamRng| rng.sample::<f64, _>(StandardNormal);
            let amps: Vec<f64> = profile
                .peak_specs
                .iter()
                .map(|p| p.amplitude_mean + p.amplitude_sd * normal(&mut rng))
                .collect();
            let nuisance = Nuisance {
                scatter: (profile.scatter_scale_sd * normal(&mut rng)).exp(),
                slope: profile.baseline_slope_sd * normal(&mut rng),
                offset: profile.baseline_offset_sd * normal(&mut rng),
            };
            let mut values = nuisance.apply(&peak_sum(&profile.peak_specs, &amps, grid));
            if profile.noise_sd > 0.0 {
                for v in &mut values {
                    *v += profile.noise_sd * normal(&mut rng);
                }
            }
            Spectrum::new(
                format!("{}-{:03}", profile.label, record % n_per_class),
                profile.label.clone(),
                "synthetic",
                values,
            )
        })
        .collect();
    let mut provenance = Provenance::new();
    provenance.insert("generator".into(), "synthgen".into());
    provenance.insert("seed".into(), seed.into());
    provenance.insert("n_per_class".into(), n_per_class.into());
    let ds = Dataset {
        grid: *grid,
        spectra,
        class_names,
        provenance,
    };
    ds.validate()?;
    Ok(ds)
}

pub fn load_profiles(path: impl AsRef<Path>) -> Result<Vec<ClassProfile>> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    Ok(serde_json::from_str(&text)?)
}

pub fn save_profiles(profiles: &[ClassProfile], path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let text = serde_json::to_string_pretty(profiles)?;
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

/// Band centers used by the built-in profiles.
pub mod centers {
    pub const LIPID_ESTER: f64 = 1740.0;
    pub const AMIDE_I: f64 = 1650.0;
    pub const AMIDE_II: f64 = 1545.0;
    pub const CH_BEND: f64 = 1455.0;
    pub const CARBOXYLATE: f64 = 1400.0;
    pub const AMIDE_III: f64 = 1240.0;
    pub const NUCLEIC_ACID: f64 = 1105.0;
    pub const CARBOHYDRATE: f64 = 1040.0;
}

fn base_peaks(scale: impl Fn(f64) -> f64) -> Vec<PeakSpec> {
    use centers::*;
    [
        (LIPID_ESTER, 10.0, 0.20),
        (AMIDE_I, 18.0, 1.00),
        (AMIDE_II, 16.0, 0.60),
        (CH_BEND, 12.0, 0.15),
        (CARBOXYLATE, 14.0, 0.20),
        (AMIDE_III, 14.0, 0.25),
        (NUCLEIC_ACID, 8.0, 0.22),
        (CARBOHYDRATE, 14.0, 0.30),
    ]
    .into_iter()
    .map(|(c, w, a)| {
        let a = a * scale(c);
        PeakSpec::new(c, w, a, 0.08 * a)
    })
    .collect()
}

fn profile(label: &str, peaks: Vec<PeakSpec>) -> ClassProfile {
    ClassProfile {
        label: label.into(),
        peak_specs: peaks,
        baseline_slope_sd: 0.05,
        scatter_scale_sd: 0.15,
        noise_sd: 0.001,
        baseline_offset_sd: 0.05,
    }
}

/// Three classes modelled on a healthy / SARS-CoV-2 / influenza B cohort:
/// the infected classes carry stronger lipid, amide, nucleic-acid and
/// carbohydrate absorption than the healthy class.
pub fn default_profiles() -> Vec<ClassProfile> {
    use centers::*;
    vec![
        profile("healthy", base_peaks(|_| 1.0)),
        profile(
            "sars_cov_2",
            base_peaks(|c| match c {
                LIPID_ESTER => 1.6,
                AMIDE_II => 1.15,
                AMIDE_III => 1.5,
                _ => 1.0,
            }),
        ),
        profile(
            "influenza_b",
            base_peaks(|c| match c {
                NUCLEIC_ACID => 1.7,
                CARBOHYDRATE => 1.4,
                AMIDE_I => 1.1,
                _ => 1.0,
            }),
        ),
    ]
}

/// Three classes that share every peak except one planted band each:
/// lipids for `lipid_class`, Amide II for `amide_ii_class` and Amide III for
/// `amide_iii_class`.
pub fn planted_band_profiles() -> Vec<ClassProfile> {
    use centers::*;
    let planted = |center: f64| move |c: f64| if c == center { 2.0 } else { 1.0 };
    vec![
        profile("lipid_class", base_peaks(planted(LIPID_ESTER))),
        profile("amide_ii_class", base_peaks(planted(AMIDE_II))),
        profile("amide_iii_class", base_peaks(planted(AMIDE_III))),
    ]
}

/// Centers whose mean amplitude differs between profile `class` and at
/// least one other profile.
pub fn discriminative_centers(profiles: &[ClassProfile], class: usize) -> Vec<f64> {
    profiles[class]
        .peak_specs
        .iter()
        .filter(|p| {
            profiles.iter().enumerate().any(|(k, other)| {
                k != class
                    && other.peak_specs.iter().any(|q| {
                        q.center_cm1 == p.center_cm1 && q.amplitude_mean != p.amplitude_mean
                    })
            })
        })
        .map(|p| p.center_cm1)
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn quiet(label: &str, peaks: Vec<PeakSpec>) -> ClassProfile {
        ClassProfile {
            label: label.into(),
            peak_specs: peaks,
            baseline_slope_sd: 0.0,
            scatter_scale_sd: 0.0,
            noise_sd: 0.0,
            baseline_offset_sd: 0.0,
        }
    }

    #[test]
    fn noise_free_single_peak() {
        let grid = WavenumberGrid::fingerprint();
        let p = quiet("a", vec![PeakSpec::new(1650.0, 20.0, 1.0, 0.0)]);
        let ds = generate_cohort(&[p], 5, &grid, 1).unwrap();
        let first = &ds.spectra[0].values;
        assert!(ds.spectra.iter().all(|s| &s.values == first));
        let argmax = (0..first.len())
            .max_by(|&a, &b| first[a].total_cmp(&first[b]))
            .unwrap();
        assert_eq!(argmax, grid.nearest_index(1650.0));
        for (j, w) in grid.wavenumbers().iter().enumerate() {
            let analytic = (-0.5 * ((w - 1650.0) / 20.0f64).powi(2)).exp();
            assert!((first[j] - analytic).abs() <= 1e-12);
        }
    }

    #[test]
    fn balanced_counts_and_determinism() {
        let grid = WavenumberGrid::fingerprint();
        let ds = generate_cohort(&default_profiles(), 50, &grid, 7).unwrap();
        assert_eq!(ds.len(), 150);
        for c in &ds.class_names {
            assert_eq!(ds.spectra.iter().filter(|s| &s.label == c).count(), 50);
        }
        assert_eq!(ds, generate_cohort(&default_profiles(), 50, &grid, 7).unwrap());
        assert_ne!(ds, generate_cohort(&default_profiles(), 50, &grid, 8).unwrap());
    }

    #[test]
    fn amide_iii_difference_concentrates_in_band() {
        let grid = WavenumberGrid::fingerprint();
        let peaks = |amp: f64| {
            vec![
                PeakSpec::new(1650.0, 18.0, 1.0, 0.05),
                PeakSpec::new(1235.0, 10.0, amp, 0.02),
                PeakSpec::new(1040.0, 14.0, 0.3, 0.02),
            ]
        };
        let mut a = quiet("a", peaks(0.25));
        let mut b = quiet("b", peaks(0.5));
        for p in [&mut a, &mut b] {
            p.noise_sd = 0.002;
            p.scatter_scale_sd = 0.02;
        }
        let ds = generate_cohort(&[a, b], 200, &grid, 3).unwrap();
        let mean = |label: &str| {
            let rows: Vec<&Spectrum> = ds.spectra.iter().filter(|s| s.label == label).collect();
            (0..grid.points)
                .map(|j| rows.iter().map(|s| s.values[j]).sum::<f64>() / rows.len() as f64)
                .collect::<Vec<f64>>()
        };
        let (ma, mb) = (mean("a"), mean("b"));
        let (mut inside, mut outside) = (0.0f64, 0.0f64);
        for (j, w) in grid.wavenumbers().iter().enumerate() {
            let d = (ma[j] - mb[j]).abs();
            if (1210.0..=1260.0).contains(w) {
                inside = inside.max(d);
            } else {
                outside = outside.max(d);
            }
        }
        assert!(inside > 5.0 * outside, "inside {inside}, outside {outside}");
    }

    #[test]
    fn profile_grid_inconsistency_is_rejected() {
        let grid = WavenumberGrid::fingerprint();
        let off_grid = quiet("a", vec![PeakSpec::new(2500.0, 10.0, 1.0, 0.0)]);
        assert!(generate_cohort(&[off_grid], 3, &grid, 0).is_err());
        let zero_width = quiet("a", vec![PeakSpec::new(1500.0, 0.0, 1.0, 0.0)]);
        assert!(generate_cohort(&[zero_width], 3, &grid, 0).is_err());
        assert!(generate_cohort(&[], 3, &grid, 0).is_err());
    }

    #[test]
    fn planted_profiles_discriminate_only_planted_centers() {
        let profiles = planted_band_profiles();
        for k in 0..3 {
            let mut got = discriminative_centers(&profiles, k);
            got.sort_by(f64::total_cmp);
            assert_eq!(
                got,
                vec![centers::AMIDE_III, centers::AMIDE_II, centers::LIPID_ESTER]
            );
        }
    }
}
