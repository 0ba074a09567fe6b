//! Spectra, datasets and the wavenumber grid they live on.
//!
//! Wavenumber axes are stored high to low (IR plotting convention), so index
//! 0 is the largest wavenumber and indices grow towards smaller wavenumbers.

mod io;

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use io::{load_dataset, save_dataset, DatasetFormat};

/// Relative tolerance used when deciding whether a wavenumber lies on a
/// range boundary.
const BOUNDARY_RTOL: f64 = 1e-9;

/// Uniform, strictly decreasing wavenumber axis.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WavenumberGrid {
    pub start_cm1: f64,
    pub end_cm1: f64,
    pub points: usize,
}

impl WavenumberGrid {
    pub fn new(start_cm1: f64, end_cm1: f64, points: usize) -> Result<Self> {
        let grid = WavenumberGrid {
            start_cm1,
            end_cm1,
            points,
        };
        grid.validate()?;
        Ok(grid)
    }

    /// 219 points over 1800 to 900 cm-1, the fingerprint region at the
    /// ~4.12 cm-1 spacing implied by 874 points over 4000 to 400 cm-1.
    pub fn fingerprint() -> Self {
        WavenumberGrid {
            start_cm1: 1800.0,
            end_cm1: 900.0,
            points: 219,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.points < 3 {
            return Err(Error::InvalidGrid(format!(
                "need at least 3 points, got {}",
                self.points
            )));
        }
        if !(self.start_cm1.is_finite() && self.end_cm1.is_finite()) {
            return Err(Error::InvalidGrid("bounds must be finite".into()));
        }
        if !(self.start_cm1 > self.end_cm1 && self.end_cm1 > 0.0) {
            return Err(Error::InvalidGrid(format!(
                "need start > end > 0, got {} -> {}",
                self.start_cm1, self.end_cm1
            )));
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.points
    }

    pub fn is_empty(&self) -> bool {
        self.points == 0
    }

    pub fn spacing(&self) -> f64 {
        (self.start_cm1 - self.end_cm1) / (self.points - 1) as f64
    }

    pub fn wavenumber(&self, index: usize) -> f64 {
        if index + 1 == self.points {
            self.end_cm1
        } else {
            self.start_cm1 - index as f64 * self.spacing()
        }
    }

    pub fn wavenumbers(&self) -> Vec<f64> {
        (0..self.points).map(|i| self.wavenumber(i)).collect()
    }

    /// Index of the grid point closest to `cm1`.
    pub fn nearest_index(&self, cm1: f64) -> usize {
        let pos = (self.start_cm1 - cm1) / self.spacing();
        pos.round().clamp(0.0, (self.points - 1) as f64) as usize
    }

    /// Indices `[first, last]` of the grid points inside the closed interval
    /// `[low, high]`, or `None` if no point falls inside.
    pub fn index_range(&self, high: f64, low: f64) -> Option<(usize, usize)> {
        let tol = BOUNDARY_RTOL * self.spacing();
        let mut inside = (0..self.points).filter(|&i| {
            let w = self.wavenumber(i);
            w <= high + tol && w >= low - tol
        });
        let first = inside.next()?;
        let last = inside.last().unwrap_or(first);
        Some((first, last))
    }

    /// Sub-grid of the points `first..=last`.
    pub fn slice(&self, first: usize, last: usize) -> Result<Self> {
        if last >= self.points || first > last {
            return Err(Error::InvalidGrid(format!(
                "slice {first}..={last} outside grid of {} points",
                self.points
            )));
        }
        WavenumberGrid::new(
            self.wavenumber(first),
            self.wavenumber(last),
            last - first + 1,
        )
    }

    /// True when both grids have the same point count and their bounds agree
    /// to `rtol` of the spacing.
    pub fn approx_eq(&self, other: &WavenumberGrid, rtol: f64) -> bool {
        let tol = rtol * self.spacing().abs().max(f64::MIN_POSITIVE);
        self.points == other.points
            && (self.start_cm1 - other.start_cm1).abs() <= tol
            && (self.end_cm1 - other.end_cm1).abs() <= tol
    }
}

/// Provenance of an augmented record.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MixupOrigin {
    pub parent_a: String,
    pub parent_b: String,
    pub lambda: f64,
    pub alpha: f64,
}

/// One absorbance trace.
#[derive(Debug, Clone, PartialEq)]
pub struct Spectrum {
    pub id: String,
    pub label: String,
    pub cohort: String,
    pub values: Vec<f64>,
    pub origin: Option<MixupOrigin>,
}

impl Spectrum {
    pub fn new(
        id: impl Into<String>,
        label: impl Into<String>,
        cohort: impl Into<String>,
        values: Vec<f64>,
    ) -> Self {
        Spectrum {
            id: id.into(),
            label: label.into(),
            cohort: cohort.into(),
            values,
            origin: None,
        }
    }

    pub fn with_values(&self, values: Vec<f64>) -> Self {
        Spectrum {
            values,
            ..self.clone()
        }
    }
}

pub type Provenance = BTreeMap<String, serde_json::Value>;

/// Spectra sharing one grid and one ordered set of class names.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub grid: WavenumberGrid,
    pub spectra: Vec<Spectrum>,
    pub class_names: Vec<String>,
    pub provenance: Provenance,
}

impl Dataset {
    pub fn new(
        grid: WavenumberGrid,
        spectra: Vec<Spectrum>,
        class_names: Vec<String>,
    ) -> Result<Self> {
        let ds = Dataset {
            grid,
            spectra,
            class_names,
            provenance: Provenance::new(),
        };
        ds.validate()?;
        Ok(ds)
    }

    pub fn validate(&self) -> Result<()> {
        self.grid.validate()?;
        for (i, name) in self.class_names.iter().enumerate() {
            if self.class_names[..i].contains(name) {
                return Err(Error::Config(format!("duplicate class name `{name}`")));
            }
        }
        for s in &self.spectra {
            self.check_spectrum(s)?;
        }
        Ok(())
    }

    fn check_spectrum(&self, s: &Spectrum) -> Result<()> {
        if s.values.len() != self.grid.points {
            return Err(Error::GridMismatch {
                id: s.id.clone(),
                expected: self.grid.points,
                found: s.values.len(),
            });
        }
        if let Some(index) = s.values.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFiniteValue {
                id: s.id.clone(),
                index,
            });
        }
        if !self.class_names.contains(&s.label) {
            return Err(Error::UnknownLabel {
                id: s.id.clone(),
                label: s.label.clone(),
            });
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.spectra.len()
    }

    pub fn is_empty(&self) -> bool {
        self.spectra.is_empty()
    }

    pub fn num_classes(&self) -> usize {
        self.class_names.len()
    }

    pub fn class_index(&self, label: &str) -> Option<usize> {
        self.class_names.iter().position(|c| c == label)
    }

    /// Class index of every spectrum, in dataset order.
    pub fn label_indices(&self) -> Vec<usize> {
        self.spectra
            .iter()
            .map(|s| self.class_index(&s.label).expect("validated label"))
            .collect()
    }

    /// New dataset with the same grid and metadata holding `spectra`.
    pub fn with_spectra(&self, spectra: Vec<Spectrum>) -> Self {
        Dataset {
            grid: self.grid,
            spectra,
            class_names: self.class_names.clone(),
            provenance: self.provenance.clone(),
        }
    }

    /// Subset by index, in the given order.
    pub fn subset(&self, indices: &[usize]) -> Self {
        self.with_spectra(indices.iter().map(|&i| self.spectra[i].clone()).collect())
    }

    /// Row-major `len() x grid.points` value matrix.
    pub fn value_matrix(&self) -> Vec<f64> {
        self.spectra
            .iter()
            .flat_map(|s| s.values.iter().copied())
            .collect()
    }
}

/// Keeps the grid points whose wavenumber lies in `[end, start]`.
///
/// Bounds may overhang the grid by less than one spacing, since no grid
/// point could lie there; this makes cropping idempotent.
pub fn crop_to_fingerprint(ds: &Dataset, start: f64, end: f64) -> Result<Dataset> {
    let (high, low) = if start >= end { (start, end) } else { (end, start) };
    let tol = (1.0 - BOUNDARY_RTOL) * ds.grid.spacing();
    let outside = || Error::RangeOutsideGrid {
        low,
        high,
        grid_low: ds.grid.end_cm1,
        grid_high: ds.grid.start_cm1,
    };
    if high > ds.grid.start_cm1 + tol || low < ds.grid.end_cm1 - tol {
        return Err(outside());
    }
    let (first, last) = ds.grid.index_range(high, low).ok_or_else(outside)?;
    let grid = ds.grid.slice(first, last)?;
    let spectra = ds
        .spectra
        .iter()
        .map(|s| s.with_values(s.values[first..=last].to_vec()))
        .collect();
    Ok(Dataset {
        grid,
        spectra,
        class_names: ds.class_names.clone(),
        provenance: ds.provenance.clone(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn toy(grid: WavenumberGrid) -> Dataset {
        let spectra = (0..3)
            .map(|k| {
                Spectrum::new(
                    format!("s{k}"),
                    "a",
                    "c1",
                    (0..grid.points).map(|i| (i * (k + 1)) as f64).collect(),
                )
            })
            .collect();
        Dataset::new(grid, spectra, vec!["a".into()]).unwrap()
    }

    #[test]
    fn grid_invariants() {
        assert!(WavenumberGrid::new(900.0, 1800.0, 10).is_err());
        assert!(WavenumberGrid::new(1800.0, 900.0, 2).is_err());
        assert!(WavenumberGrid::new(1800.0, -1.0, 10).is_err());
        let g = WavenumberGrid::fingerprint();
        assert_eq!(g.wavenumber(0), 1800.0);
        assert_eq!(g.wavenumber(218), 900.0);
        assert_eq!(g.nearest_index(1650.0), 36);
    }

    #[test]
    fn crop_acquisition_grid_matches_enumeration() {
        let grid = WavenumberGrid::new(4000.0, 400.0, 874).unwrap();
        // independent enumeration of points inside [900, 1800]
        let step = 3600.0 / 873.0;
        let expected: Vec<usize> = (0..874)
            .filter(|&i| {
                let w = 4000.0 - i as f64 * step;
                (900.0..=1800.0).contains(&w)
            })
            .collect();
        let cropped = crop_to_fingerprint(&toy(grid), 1800.0, 900.0).unwrap();
        assert_eq!(cropped.grid.points, expected.len());
        assert_eq!(cropped.grid.points, 218);
        assert_eq!(cropped.spectra[1].values[0], (expected[0] * 2) as f64);
        let spacing = cropped.grid.spacing();
        assert!((spacing - step).abs() / step < 1e-9);
    }

    #[test]
    fn crop_full_range_is_identity_and_idempotent() {
        let ds = toy(WavenumberGrid::fingerprint());
        let full = crop_to_fingerprint(&ds, 1800.0, 900.0).unwrap();
        assert_eq!(full, ds);
        let once = crop_to_fingerprint(&ds, 1700.0, 1000.0).unwrap();
        let twice = crop_to_fingerprint(&once, 1700.0, 1000.0).unwrap();
        assert_eq!(once, twice);
        assert!(once.grid.start_cm1 <= 1700.0 && once.grid.end_cm1 >= 1000.0);
    }

    #[test]
    fn crop_outside_grid_fails() {
        let ds = toy(WavenumberGrid::fingerprint());
        assert!(matches!(
            crop_to_fingerprint(&ds, 2000.0, 5000.0),
            Err(Error::RangeOutsideGrid { .. })
        ));
    }

    #[test]
    fn dataset_validation_errors() {
        let grid = WavenumberGrid::fingerprint();
        let short = Spectrum::new("bad", "a", "c", vec![0.0; 218]);
        match Dataset::new(grid, vec![short], vec!["a".into()]) {
            Err(Error::GridMismatch { id, .. }) => assert_eq!(id, "bad"),
            other => panic!("{other:?}"),
        }
        let unknown = Spectrum::new("u", "zzz", "c", vec![0.0; 219]);
        assert!(matches!(
            Dataset::new(grid, vec![unknown], vec!["a".into()]),
            Err(Error::UnknownLabel { .. })
        ));
    }
}
