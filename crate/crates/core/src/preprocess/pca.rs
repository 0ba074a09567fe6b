//! Principal component projection with per-class marginal densities.

use std::collections::BTreeMap;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::spectra::Dataset;

const DENSITY_POINTS: usize = 128;

/// Gaussian kernel density estimate sampled on a regular grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Density1d {
    pub bandwidth: f64,
    pub x: Vec<f64>,
    pub density: Vec<f64>,
}

/// Marginal densities of one class, one entry per component.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassDensity {
    pub components: Vec<Density1d>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PcaReport {
    pub ids: Vec<String>,
    pub labels: Vec<String>,
    /// Per-spectrum scores, `[pc1, pc2, ...]`.
    pub scores: Vec<Vec<f64>>,
    pub explained_variance_ratio: Vec<f64>,
    /// Unit loading vectors, one per component.
    pub components: Vec<Vec<f64>>,
    pub mean: Vec<f64>,
    pub densities: BTreeMap<String, ClassDensity>,
}

impl PcaReport {
    /// Maps scores back to feature space: `mean + sum_k score_k * component_k`.
    pub fn reconstruct(&self) -> Vec<Vec<f64>> {
        self.scores
            .iter()
            .map(|row| {
                let mut x = self.mean.clone();
                for (score, comp) in row.iter().zip(&self.components) {
                    for (xi, ci) in x.iter_mut().zip(comp) {
                        *xi += score * ci;
                    }
                }
                x
            })
            .collect()
    }
}

/// Projects the mean-centered value matrix onto its top `components`
/// principal axes.
///
/// Each axis is oriented so that its largest-magnitude loading is positive.
pub fn pca_projection(ds: &Dataset, components: usize) -> Result<PcaReport> {
    let n = ds.len();
    let p = ds.grid.points;
    if n < 3 {
        return Err(Error::TooFewSamples(format!(
            "PCA needs at least 3 spectra, got {n}"
        )));
    }
    if components == 0 || components > p.min(n) {
        return Err(Error::Config(format!(
            "cannot extract {components} components from {n} x {p} data"
        )));
    }
    let mut mean = vec![0.0; p];
    for s in &ds.spectra {
        for (m, v) in mean.iter_mut().zip(&s.values) {
            *m += v;
        }
    }
    for m in &mut mean {
        *m /= n as f64;
    }
    let centered = DMatrix::from_fn(n, p, |i, j| ds.spectra[i].values[j] - mean[j]);
    let svd = centered.clone().svd(false, true);
    let v_t = svd
        .v_t
        .ok_or_else(|| Error::Degenerate("SVD did not converge".into()))?;
    let sv = svd.singular_values;
    let total: f64 = sv.iter().map(|s| s * s).sum();
    let largest = sv.iter().fold(0.0f64, |a, &b| a.max(b));
    let magnitude = ds
        .spectra
        .iter()
        .flat_map(|s| s.values.iter())
        .fold(0.0f64, |a, &b| a.max(b.abs()));
    if !(total > 0.0) || largest <= 1e-10 * magnitude * (n as f64).sqrt() {
        return Err(Error::Degenerate(
            "covariance has rank 0: all spectra are identical".into(),
        ));
    }
    let mut order: Vec<usize> = (0..sv.len()).collect();
    order.sort_by(|&a, &b| sv[b].total_cmp(&sv[a]).then(a.cmp(&b)));

    let mut loadings = Vec::with_capacity(components);
    let mut ratios = Vec::with_capacity(components);
    for &k in order.iter().take(components) {
        let mut v: Vec<f64> = v_t.row(k).iter().copied().collect();
        let pivot = v
            .iter()
            .enumerate()
            .fold((0, 0.0f64), |best, (i, x)| {
                if x.abs() > best.1 {
                    (i, x.abs())
                } else {
                    best
                }
            })
            .0;
        if v[pivot] < 0.0 {
            v.iter_mut().for_each(|x| *x = -*x);
        }
        ratios.push(sv[k] * sv[k] / total);
        loadings.push(v);
    }
    let scores: Vec<Vec<f64>> = (0..n)
        .map(|i| {
            loadings
                .iter()
                .map(|v| (0..p).map(|j| centered[(i, j)] * v[j]).sum())
                .collect()
        })
        .collect();

    let mut densities = BTreeMap::new();
    let ranges: Vec<(f64, f64)> = (0..components)
        .map(|k| {
            scores.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), s| {
                (lo.min(s[k]), hi.max(s[k]))
            })
        })
        .collect();
    for class in &ds.class_names {
        let members: Vec<usize> = (0..n).filter(|&i| &ds.spectra[i].label == class).collect();
        if members.is_empty() {
            continue;
        }
        let comps = (0..components)
            .map(|k| {
                let sample: Vec<f64> = members.iter().map(|&i| scores[i][k]).collect();
                kde(&sample, ranges[k])
            })
            .collect();
        densities.insert(class.clone(), ClassDensity { components: comps });
    }

    Ok(PcaReport {
        ids: ds.spectra.iter().map(|s| s.id.clone()).collect(),
        labels: ds.spectra.iter().map(|s| s.label.clone()).collect(),
        scores,
        explained_variance_ratio: ratios,
        components: loadings,
        mean,
        densities,
    })
}

/// Silverman's rule of thumb: `0.9 * min(sd, IQR / 1.34) * n^(-1/5)`.
pub(crate) fn silverman_bandwidth(sample: &[f64]) -> f64 {
    let n = sample.len() as f64;
    let mean = sample.iter().sum::<f64>() / n;
    let sd = if sample.len() > 1 {
        (sample.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
    } else {
        0.0
    };
    let mut sorted = sample.to_vec();
    sorted.sort_by(f64::total_cmp);
    let q = |f: f64| {
        let pos = f * (sorted.len() - 1) as f64;
        let lo = pos.floor() as usize;
        let hi = pos.ceil() as usize;
        sorted[lo] + (sorted[hi] - sorted[lo]) * (pos - lo as f64)
    };
    let iqr = q(0.75) - q(0.25);
    let spread = if iqr > 0.0 { sd.min(iqr / 1.34) } else { sd };
    let h = 0.9 * spread * n.powf(-0.2);
    if h > 0.0 {
        h
    } else {
        1e-3 * mean.abs().max(1.0)
    }
}

fn kde(sample: &[f64], (lo, hi): (f64, f64)) -> Density1d {
    let h = silverman_bandwidth(sample);
    let (a, b) = (lo - 3.0 * h, hi + 3.0 * h);
    let norm = 1.0 / (sample.len() as f64 * h * (2.0 * std::f64::consts::PI).sqrt());
    let x: Vec<f64> = (0..DENSITY_POINTS)
        .map(|i| a + (b - a) * i as f64 / (DENSITY_POINTS - 1) as f64)
        .collect();
    let density = x
        .iter()
        .map(|&t| {
            norm * sample
                .iter()
                .map(|s| (-0.5 * ((t - s) / h).powi(2)).exp())
                .sum::<f64>()
        })
        .collect();
    Density1d {
        bandwidth: h,
        x,
        density,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spectra::{Spectrum, WavenumberGrid};
    use rand::Rng;
    use rand_distr::StandardNormal;

    fn dataset(rows: Vec<Vec<f64>>) -> Dataset {
        let p = rows[0].len();
        let grid = WavenumberGrid::new(1800.0, 900.0, p.max(3)).unwrap();
        let labels = ["a", "b"];
        let spectra = rows
            .into_iter()
            .enumerate()
            .map(|(i, mut v)| {
                v.resize(grid.points, 0.0);
                Spectrum::new(format!("r{i}"), labels[i % 2], "c", v)
            })
            .collect();
        Dataset::new(grid, spectra, vec!["a".into(), "b".into()]).unwrap()
    }

    #[test]
    fn points_on_a_line_have_one_component() {
        let dir = [1.0, -2.0, 0.5];
        let rows = (0..10)
            .map(|i| {
                let t = i as f64 * 0.7 - 2.0;
                vec![3.0 + t * dir[0], 1.0 + t * dir[1], -1.0 + t * dir[2]]
            })
            .collect();
        let rep = pca_projection(&dataset(rows), 2).unwrap();
        assert!((rep.explained_variance_ratio[0] - 1.0).abs() <= 1e-9);
        // sign convention: the largest-magnitude loading is positive
        assert!(rep.components[0][1] > 0.0);
    }

    #[test]
    fn isotropic_cloud_splits_variance_evenly() {
        let mut rng = crate::rng::stream(2024, 0);
        let rows = (0..1000)
            .map(|_| {
                vec![
                    rng.sample::<f64, _>(StandardNormal),
                    rng.sample::<f64, _>(StandardNormal),
                    0.0,
                ]
            })
            .collect();
        let rep = pca_projection(&dataset(rows), 2).unwrap();
        for r in &rep.explained_variance_ratio {
            assert!((r - 0.5).abs() <= 0.05, "{r}");
        }
    }

    #[test]
    fn rank_two_data_reconstructs_exactly() {
        let rows: Vec<Vec<f64>> = (0..12)
            .map(|i| {
                let (a, b) = ((i as f64).sin(), (i as f64 * 0.3).cos());
                (0..6).map(|j| 1.0 + a * j as f64 - b * (j * j) as f64 * 0.1).collect()
            })
            .collect();
        let ds = dataset(rows);
        let rep = pca_projection(&ds, 2).unwrap();
        for (orig, back) in ds.spectra.iter().zip(rep.reconstruct()) {
            for (a, b) in orig.values.iter().zip(&back) {
                assert!((a - b).abs() <= 1e-8);
            }
        }
    }

    #[test]
    fn scores_invariant_under_constant_shift() {
        let rows: Vec<Vec<f64>> = (0..9)
            .map(|i| (0..5).map(|j| ((i * 7 + j * 3) % 11) as f64).collect())
            .collect();
        let shifted: Vec<Vec<f64>> = rows
            .iter()
            .map(|r| r.iter().enumerate().map(|(j, v)| v + 10.0 * j as f64 - 4.0).collect())
            .collect();
        let a = pca_projection(&dataset(rows), 2).unwrap();
        let b = pca_projection(&dataset(shifted), 2).unwrap();
        for (x, y) in a.scores.iter().zip(&b.scores) {
            for (p, q) in x.iter().zip(y) {
                assert!((p - q).abs() <= 1e-9);
            }
        }
    }

    #[test]
    fn identical_spectra_are_degenerate() {
        let rows = vec![vec![1.0, 2.0, 3.0]; 4];
        assert!(matches!(
            pca_projection(&dataset(rows), 2),
            Err(Error::Degenerate(_))
        ));
        assert!(pca_projection(&dataset(vec![vec![1.0, 2.0, 3.0]; 2]), 2).is_err());
    }

    #[test]
    fn densities_integrate_to_one() {
        let rows: Vec<Vec<f64>> = (0..40)
            .map(|i| vec![(i as f64 * 1.3).sin() * 3.0, (i as f64 * 0.7).cos(), 0.2 * i as f64])
            .collect();
        let rep = pca_projection(&dataset(rows), 2).unwrap();
        for d in rep.densities.values() {
            for c in &d.components {
                let dx = c.x[1] - c.x[0];
                let area: f64 = c.density.iter().sum::<f64>() * dx;
                assert!((area - 1.0).abs() < 0.02, "{area}");
            }
        }
    }
}
