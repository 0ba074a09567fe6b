//! Grad-CAM saliency, salient regions and band overlap ratios.

use std::fmt::Write as _;
use std::path::Path;

use indexmap::IndexMap;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::network::{argmax, batch_tensor, forward, Mode};
use crate::model::ModelParams;
use crate::spectra::{Dataset, WavenumberGrid};

const CAM_CHUNK: usize = 64;

/// Per-wavenumber importance weights in `[0, 1]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SaliencyMap {
    pub grid: WavenumberGrid,
    pub weights: Vec<f64>,
    pub target_class: String,
    pub spectrum_id: String,
}

/// Named absorption intervals, each stored as `(high_cm1, low_cm1)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "IndexMap<String, (f64, f64)>", into = "IndexMap<String, (f64, f64)>")]
pub struct BandTable {
    bands: IndexMap<String, (f64, f64)>,
}

impl Default for BandTable {
    fn default() -> Self {
        let bands = [
            ("lipids", (1750.0, 1700.0)),
            ("amide_I", (1700.0, 1600.0)),
            ("amide_II", (1580.0, 1480.0)),
            ("amide_III", (1300.0, 1200.0)),
            ("nucleic_acids", (1120.0, 1080.0)),
            ("carbohydrates", (1100.0, 1000.0)),
        ];
        BandTable {
            bands: bands.into_iter().map(|(n, b)| (n.to_string(), b)).collect(),
        }
    }
}

impl TryFrom<IndexMap<String, (f64, f64)>> for BandTable {
    type Error = Error;

    fn try_from(bands: IndexMap<String, (f64, f64)>) -> Result<Self> {
        for (name, &(high, low)) in &bands {
            if !(high > low) || !high.is_finite() || !low.is_finite() {
                return Err(Error::Config(format!(
                    "band `{name}`: high {high} must exceed low {low}"
                )));
            }
        }
        Ok(BandTable { bands })
    }
}

impl From<BandTable> for IndexMap<String, (f64, f64)> {
    fn from(t: BandTable) -> Self {
        t.bands
    }
}

impl BandTable {
    pub fn new(bands: impl IntoIterator<Item = (String, (f64, f64))>) -> Result<Self> {
        let mut map = IndexMap::new();
        for (name, band) in bands {
            if map.insert(name.clone(), band).is_some() {
                return Err(Error::Config(format!("duplicate band `{name}`")));
            }
        }
        BandTable::try_from(map)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Ok(serde_json::from_str(&text)?)
    }

    pub fn get(&self, name: &str) -> Option<(f64, f64)> {
        self.bands.get(name).copied()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, (f64, f64))> {
        self.bands.iter().map(|(n, &b)| (n.as_str(), b))
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.bands.keys().map(String::as_str)
    }

    pub fn len(&self) -> usize {
        self.bands.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bands.is_empty()
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DenominatorMode {
    /// Sum of all weights inside the band.
    #[default]
    WeightsInBand,
    /// Number of grid points inside the band.
    BandMass,
}

impl DenominatorMode {
    pub fn as_str(self) -> &'static str {
        match self {
            DenominatorMode::WeightsInBand => "weights_in_band",
            DenominatorMode::BandMass => "band_mass",
        }
    }
}

/// Rectified gradient-weighted sum of activation channels for one spectrum.
///
/// `activation` and `gradient` are `[tokens, channels]` row-major; channel
/// weights are the token-averaged gradients.
pub fn cam_from_activations(activation: &[f64], gradient: &[f64], channels: usize) -> Vec<f64> {
    let tokens = activation.len() / channels;
    let mut alpha = vec![0.0; channels];
    for row in gradient.chunks_exact(channels) {
        for (a, g) in alpha.iter_mut().zip(row) {
            *a += g;
        }
    }
    alpha.iter_mut().for_each(|a| *a /= tokens as f64);
    activation
        .chunks_exact(channels)
        .map(|row| {
            let s = row.iter().zip(&alpha).fold(0.0, |acc, (x, a)| acc + x * a);
            if s > 0.0 {
                s
            } else {
                0.0
            }
        })
        .collect()
}

/// Linear interpolation of a token-level map onto `points` input positions.
///
/// Token `t` sits at the centre of its receptive field,
/// `t * stride + (kernel - 1) / 2`; positions outside the first and last
/// centres take the nearest token's value.
pub fn upsample_tokens(raw: &[f64], kernel: usize, stride: usize, points: usize) -> Vec<f64> {
    let centre = |t: usize| t as f64 * stride as f64 + (kernel as f64 - 1.0) / 2.0;
    let last = raw.len() - 1;
    (0..points)
        .map(|j| {
            let x = j as f64;
            if x <= centre(0) {
                return raw[0];
            }
            if x >= centre(last) {
                return raw[last];
            }
            let t = ((x - centre(0)) / stride as f64).floor() as usize;
            let t = t.min(last - 1);
            let frac = (x - centre(t)) / stride as f64;
            raw[t] * (1.0 - frac) + raw[t + 1] * frac
        })
        .collect()
}

/// Divides by the maximum; an all-zero map stays all-zero.
pub fn normalize_max(v: &mut [f64]) {
    let max = v.iter().fold(0.0f64, |a, &b| a.max(b));
    if max > 0.0 {
        v.iter_mut().for_each(|x| *x = (*x / max).clamp(0.0, 1.0));
    }
}

/// Grad-CAM maps for `indices` of `ds`, each explaining the matching entry
/// of `targets`.
pub fn grad_cam_batch(
    params: &ModelParams,
    ds: &Dataset,
    indices: &[usize],
    targets: &[usize],
) -> Result<Vec<SaliencyMap>> {
    let cfg = &params.config;
    if ds.grid.points != cfg.input_length {
        return Err(Error::Shape(format!(
            "dataset has {} points, model expects {}",
            ds.grid.points, cfg.input_length
        )));
    }
    if indices.len() != targets.len() {
        return Err(Error::LengthMismatch(format!(
            "{} spectra but {} targets",
            indices.len(),
            targets.len()
        )));
    }
    if let Some(&bad) = targets.iter().find(|&&t| t >= cfg.num_classes) {
        return Err(Error::Config(format!("target class {bad} out of range")));
    }
    let (t, c, k) = (cfg.tokens(), cfg.head_conv_channels, cfg.num_classes);
    let mut out = Vec::with_capacity(indices.len());
    for (chunk, tchunk) in indices.chunks(CAM_CHUNK).zip(targets.chunks(CAM_CHUNK)) {
        let fw = forward(params, &batch_tensor(ds, chunk), Mode::Infer)?;
        let mut seed = vec![0.0; chunk.len() * k];
        for (r, &target) in tchunk.iter().enumerate() {
            seed[r * k + target] = 1.0;
        }
        let grads = fw.tape.backward(fw.logits, seed);
        let act = fw.head_activation();
        let g = grads.get_or_zero(fw.head_activation, act.len());
        for (r, (&i, &target)) in chunk.iter().zip(tchunk).enumerate() {
            let span = r * t * c..(r + 1) * t * c;
            let raw = cam_from_activations(&act.data[span.clone()], &g[span], c);
            let mut weights = upsample_tokens(&raw, cfg.embed_kernel, cfg.embed_stride, cfg.input_length);
            normalize_max(&mut weights);
            out.push(SaliencyMap {
                grid: ds.grid.clone(),
                weights,
                target_class: ds.class_names[target].clone(),
                spectrum_id: ds.spectra[i].id.clone(),
            });
        }
    }
    Ok(out)
}

/// Grad-CAM map of spectrum `index` for class `target`.
pub fn grad_cam(params: &ModelParams, ds: &Dataset, index: usize, target: usize) -> Result<SaliencyMap> {
    Ok(grad_cam_batch(params, ds, &[index], &[target])?.remove(0))
}

/// A maximal run of grid points with weight above the threshold.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Region {
    pub first: usize,
    pub last: usize,
    pub high_cm1: f64,
    pub low_cm1: f64,
}

pub fn salient_regions(map: &SaliencyMap, beta: f64) -> Vec<Region> {
    let mut out = Vec::new();
    let mut start = None;
    for (j, &w) in map.weights.iter().enumerate() {
        match (w > beta, start) {
            (true, None) => start = Some(j),
            (false, Some(s)) => {
                out.push(region(&map.grid, s, j - 1));
                start = None;
            }
            _ => {}
        }
    }
    if let Some(s) = start {
        out.push(region(&map.grid, s, map.weights.len() - 1));
    }
    out
}

fn region(grid: &WavenumberGrid, first: usize, last: usize) -> Region {
    Region {
        first,
        last,
        high_cm1: grid.wavenumber(first),
        low_cm1: grid.wavenumber(last),
    }
}

/// Share of the in-band saliency carried by points above `beta`.
pub fn overlap_ratio(
    map: &SaliencyMap,
    band: (f64, f64),
    beta: f64,
    mode: DenominatorMode,
) -> Result<f64> {
    let (first, last) = map
        .grid
        .index_range(band.0, band.1)
        .ok_or_else(|| Error::EmptyBand(format!("[{}, {}] cm-1", band.0, band.1)))?;
    let inside = &map.weights[first..=last];
    let numerator = inside.iter().filter(|&&w| w > beta).fold(0.0, |a, w| a + w);
    let denominator = match mode {
        DenominatorMode::WeightsInBand => inside.iter().fold(0.0, |a, w| a + w),
        DenominatorMode::BandMass => inside.len() as f64,
    };
    Ok(if denominator > 0.0 {
        numerator / denominator
    } else {
        0.0
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OverlapRow {
    pub class: String,
    pub band: String,
    pub beta: f64,
    pub gamma: f64,
    pub denominator_mode: DenominatorMode,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OverlapReport {
    pub rows: Vec<OverlapRow>,
    /// Class-averaged maps, renormalized to a maximum of 1.
    pub class_maps: IndexMap<String, SaliencyMap>,
    /// Correctly classified spectra behind each class map.
    pub support: IndexMap<String, usize>,
    /// Classes without a map, with the reason.
    pub skipped: IndexMap<String, String>,
}

impl OverlapReport {
    pub fn gamma(&self, class: &str, band: &str, beta: f64) -> Option<f64> {
        self.rows
            .iter()
            .find(|r| r.class == class && r.band == band && r.beta == beta)
            .map(|r| r.gamma)
    }

    /// Band with the largest γ for `class` at `beta`; ties keep table order.
    pub fn top_band(&self, class: &str, beta: f64) -> Option<&str> {
        let mut best: Option<&OverlapRow> = None;
        for r in self.rows.iter().filter(|r| r.class == class && r.beta == beta) {
            if best.is_none_or(|b| r.gamma > b.gamma) {
                best = Some(r);
            }
        }
        best.map(|r| r.band.as_str())
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("class,band,beta,gamma,denominator_mode\n");
        for r in &self.rows {
            let _ = writeln!(
                out,
                "{},{},{},{},{}",
                r.class,
                r.band,
                r.beta,
                r.gamma,
                r.denominator_mode.as_str()
            );
        }
        out
    }
}

/// Averages the saliency maps of correctly classified spectra per class and
/// scores every band at every threshold.
pub fn class_overlap_report(
    params: &ModelParams,
    test_ds: &Dataset,
    bands: &BandTable,
    betas: &[f64],
    mode: DenominatorMode,
) -> Result<OverlapReport> {
    if test_ds.is_empty() {
        return Err(Error::TooFewSamples("overlap report needs test spectra".into()));
    }
    if let Some(b) = betas.iter().find(|b| !(**b > 0.0 && **b < 1.0)) {
        return Err(Error::Config(format!("threshold {b} must lie in (0, 1)")));
    }
    for (name, band) in bands.iter() {
        if test_ds.grid.index_range(band.0, band.1).is_none() {
            return Err(Error::EmptyBand(name.to_string()));
        }
    }
    let probs = crate::model::predict(params, test_ds)?;
    let labels = test_ds.label_indices();
    let mut report = OverlapReport {
        rows: Vec::new(),
        class_maps: IndexMap::new(),
        support: IndexMap::new(),
        skipped: IndexMap::new(),
    };
    for (c, class) in test_ds.class_names.iter().enumerate() {
        let members: Vec<usize> = (0..test_ds.len())
            .filter(|&i| labels[i] == c && argmax(&probs[i]) == c)
            .collect();
        if members.is_empty() {
            report
                .skipped
                .insert(class.clone(), "no correctly classified test spectra".into());
            continue;
        }
        let maps = grad_cam_batch(params, test_ds, &members, &vec![c; members.len()])?;
        let mut mean = vec![0.0; test_ds.grid.points];
        for m in &maps {
            for (a, w) in mean.iter_mut().zip(&m.weights) {
                *a += w;
            }
        }
        mean.iter_mut().for_each(|a| *a /= maps.len() as f64);
        normalize_max(&mut mean);
        let map = SaliencyMap {
            grid: test_ds.grid.clone(),
            weights: mean,
            target_class: class.clone(),
            spectrum_id: format!("mean:{class}"),
        };
        for (name, band) in bands.iter() {
            for &beta in betas {
                report.rows.push(OverlapRow {
                    class: class.clone(),
                    band: name.to_string(),
                    beta,
                    gamma: overlap_ratio(&map, band, beta, mode)?,
                    denominator_mode: mode,
                });
            }
        }
        report.support.insert(class.clone(), members.len());
        report.class_maps.insert(class.clone(), map);
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn map(weights: Vec<f64>) -> SaliencyMap {
        SaliencyMap {
            grid: WavenumberGrid::new(1800.0, 900.0, weights.len()).unwrap(),
            weights,
            target_class: "a".into(),
            spectrum_id: "s".into(),
        }
    }

    #[test]
    fn single_channel_cam_is_scaled_activation() {
        let act = [0.0, 1.0, 3.0, 2.0];
        let grad = [0.5; 4];
        let raw = cam_from_activations(&act, &grad, 1);
        assert_eq!(raw, vec![0.0, 0.5, 1.5, 1.0]);
        let mut up = upsample_tokens(&raw, 1, 1, 4);
        normalize_max(&mut up);
        assert_eq!(up, vec![0.0, 1.0 / 3.0, 1.0, 2.0 / 3.0]);
    }

    #[test]
    fn zero_gradient_gives_zero_map() {
        let raw = cam_from_activations(&[1.0, 2.0, 3.0, 4.0], &[0.0; 4], 2);
        let mut up = upsample_tokens(&raw, 4, 4, 9);
        normalize_max(&mut up);
        assert!(up.iter().all(|&w| w == 0.0));
    }

    #[test]
    fn upsampling_hits_token_centres() {
        let raw = [1.0, 3.0, 2.0];
        let up = upsample_tokens(&raw, 4, 4, 12);
        // centres at 1.5, 5.5, 9.5
        assert_eq!(up[0], 1.0);
        assert_eq!(up[1], 1.0);
        assert!((up[2] - 1.25).abs() < 1e-15);
        assert!((up[7] - 2.625).abs() < 1e-15);
        assert_eq!(up[11], 2.0);
    }

    #[test]
    fn regions_cover_whole_grid_or_indicator() {
        let full = map(vec![1.0; 30]);
        let r = salient_regions(&full, 0.5);
        assert_eq!(r.len(), 1);
        assert_eq!((r[0].first, r[0].last), (0, 29));
        assert_eq!((r[0].high_cm1, r[0].low_cm1), (1800.0, 900.0));

        let ind = map((0..30).map(|j| f64::from((10..=20).contains(&j))).collect());
        let r = salient_regions(&ind, 0.2);
        assert_eq!(r.len(), 1);
        assert_eq!((r[0].first, r[0].last), (10, 20));
    }

    #[test]
    fn overlap_ratio_analytic_cases() {
        // 4 in-band points at 1800, 1770, 1740, 1710 on a 31-point grid
        let mut w = vec![0.0; 31];
        w[..4].copy_from_slice(&[0.1, 0.1, 0.9, 0.9]);
        let m = map(w);
        let band = (1800.0, 1710.0);
        let a = overlap_ratio(&m, band, 0.2, DenominatorMode::WeightsInBand).unwrap();
        let b = overlap_ratio(&m, band, 0.2, DenominatorMode::BandMass).unwrap();
        assert!((a - 0.9).abs() < 1e-12);
        assert!((b - 0.45).abs() < 1e-12);

        let ones = map(vec![1.0; 31]);
        for mode in [DenominatorMode::WeightsInBand, DenominatorMode::BandMass] {
            assert_eq!(overlap_ratio(&ones, band, 0.2, mode).unwrap(), 1.0);
        }
        assert!(matches!(
            overlap_ratio(&ones, (2000.0, 1900.0), 0.2, DenominatorMode::WeightsInBand),
            Err(Error::EmptyBand(_))
        ));
    }

    #[test]
    fn band_table_json_and_validation() {
        let t = BandTable::default();
        let text = serde_json::to_string(&t).unwrap();
        assert!(text.starts_with(r#"{"lipids":[1750.0,1700.0]"#));
        let back: BandTable = serde_json::from_str(&text).unwrap();
        assert_eq!(back, t);
        assert!(serde_json::from_str::<BandTable>(r#"{"x":[1000.0,1100.0]}"#).is_err());
        assert!(BandTable::new([("a".into(), (2.0, 1.0)), ("a".into(), (3.0, 1.0))]).is_err());
    }
}
