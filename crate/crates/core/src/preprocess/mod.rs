//! Spectral preprocessing: fingerprint crop, SNV normalization and the
//! three-point second difference.

mod pca;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::spectra::{crop_to_fingerprint, Dataset};

pub use pca::{pca_projection, ClassDensity, Density1d, PcaReport};

/// Floor on the population standard deviation accepted by [`snv`].
pub const MIN_STD: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BoundaryPolicy {
    /// Interior points only; output has `N - 2` values.
    Shrink,
    /// Keep `N` values, copying each endpoint from its interior neighbour.
    Replicate,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PipelineOrder {
    SnvThenDerivative,
    DerivativeThenSnv,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PreprocessConfig {
    /// `(start, end)` in cm-1; `None` skips cropping.
    pub crop: Option<(f64, f64)>,
    pub apply_snv: bool,
    pub apply_second_derivative: bool,
    pub boundary_policy: BoundaryPolicy,
    pub order: PipelineOrder,
}

impl Default for PreprocessConfig {
    fn default() -> Self {
        PreprocessConfig {
            crop: Some((1800.0, 900.0)),
            apply_snv: true,
            apply_second_derivative: true,
            boundary_policy: BoundaryPolicy::Shrink,
            order: PipelineOrder::SnvThenDerivative,
        }
    }
}

impl PreprocessConfig {
    pub fn snv_only() -> Self {
        PreprocessConfig {
            apply_second_derivative: false,
            ..Default::default()
        }
    }

    /// Number of grid points produced from `input_points`.
    pub fn output_len(&self, input_points: usize) -> usize {
        if self.apply_second_derivative && self.boundary_policy == BoundaryPolicy::Shrink {
            input_points.saturating_sub(2)
        } else {
            input_points
        }
    }

    /// Applies SNV and/or the second derivative to one trace.
    pub fn transform(&self, values: &[f64]) -> Result<Vec<f64>> {
        let deriv = |v: &[f64]| second_derivative(v, self.boundary_policy);
        match (self.apply_snv, self.apply_second_derivative, self.order) {
            (false, false, _) => Ok(values.to_vec()),
            (true, false, _) => snv(values),
            (false, true, _) => deriv(values),
            (true, true, PipelineOrder::SnvThenDerivative) => deriv(&snv(values)?),
            (true, true, PipelineOrder::DerivativeThenSnv) => snv(&deriv(values)?),
        }
    }
}

/// Population mean and standard deviation (divisor `N`).
pub fn mean_std(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
    (mean, var.sqrt())
}

/// Standard normal variate: `(s_j - mean) / std` with the population std.
pub fn snv(values: &[f64]) -> Result<Vec<f64>> {
    if values.len() < 2 {
        return Err(Error::TooShort {
            needed: 2,
            got: values.len(),
        });
    }
    let (mean, std) = mean_std(values);
    if !(std > MIN_STD) {
        return Err(Error::ZeroVariance(std));
    }
    Ok(values.iter().map(|v| (v - mean) / std).collect())
}

/// Central second difference `s[j+1] - 2 s[j] + s[j-1]`.
pub fn second_derivative(values: &[f64], policy: BoundaryPolicy) -> Result<Vec<f64>> {
    let n = values.len();
    if n < 3 {
        return Err(Error::TooShort { needed: 3, got: n });
    }
    let interior = values
        .windows(3)
        .map(|w| w[2] - 2.0 * w[1] + w[0]);
    Ok(match policy {
        BoundaryPolicy::Shrink => interior.collect(),
        BoundaryPolicy::Replicate => {
            let mut out = Vec::with_capacity(n);
            out.push(0.0);
            out.extend(interior);
            out[0] = out[1];
            out.push(out[n - 2]);
            out
        }
    })
}

/// Crop, then SNV and second derivative per spectrum in the configured order.
pub fn preprocess_dataset(ds: &Dataset, cfg: &PreprocessConfig) -> Result<Dataset> {
    let cropped = match cfg.crop {
        Some((start, end)) => crop_to_fingerprint(ds, start, end)?,
        None => ds.clone(),
    };
    let values = cropped
        .spectra
        .par_iter()
        .map(|s| cfg.transform(&s.values).map_err(|e| Error::in_spectrum(&s.id, e)))
        .collect::<Result<Vec<_>>>()?;
    let grid = if cfg.output_len(cropped.grid.points) == cropped.grid.points {
        cropped.grid
    } else {
        cropped.grid.slice(1, cropped.grid.points - 2)?
    };
    let spectra = cropped
        .spectra
        .iter()
        .zip(values)
        .map(|(s, v)| s.with_values(v))
        .collect();
    let mut out = Dataset {
        grid,
        spectra,
        class_names: cropped.class_names,
        provenance: cropped.provenance,
    };
    out.provenance
        .insert("preprocess".into(), serde_json::to_value(cfg)?);
    out.validate()?;
    Ok(out)
}
