//! Cross-validation: preprocess, augment the training part, train, score.

use std::collections::HashSet;

use indexmap::IndexMap;
use rand::seq::SliceRandom;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::metrics::{compute_metrics, MetricsReport};
use super::splits::{make_splits, SplitMode, SplitPlan};
use crate::augment::{audit_partners, augment_dataset, AugmentConfig};
use crate::error::{Error, Result};
use crate::model::train::{train, EpochRecord, TrainConfig};
use crate::model::{predict, ModelConfig, ModelParams};
use crate::preprocess::{preprocess_dataset, PreprocessConfig};
use crate::rng::derive_seed;
use crate::spectra::Dataset;

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default)]
pub struct CvConfig {
    pub preprocess: PreprocessConfig,
    pub augment: AugmentConfig,
    pub model: ModelConfig,
    pub train: TrainConfig,
    pub split_mode: SplitMode,
    pub seed: u64,
}

/// Seeds used by one round, derived from the master seed and the fold.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct FoldSeeds {
    pub augment: u64,
    pub model: u64,
    pub train: u64,
}

impl FoldSeeds {
    pub fn new(cfg: &CvConfig, fold: usize) -> Self {
        let base = derive_seed(cfg.seed, fold as u64 + 1);
        FoldSeeds {
            augment: derive_seed(cfg.augment.seed, base),
            model: derive_seed(cfg.model.seed, base),
            train: derive_seed(cfg.train.seed, base),
        }
    }
}

pub struct FoldResult {
    pub fold: usize,
    pub seeds: FoldSeeds,
    pub metrics: MetricsReport,
    pub curves: Vec<EpochRecord>,
    pub params: ModelParams,
    /// Preprocessed held-out spectra.
    pub test: Dataset,
    pub train_size: usize,
    pub augmented_size: usize,
    /// Augmented records whose parents are not same-class members of the
    /// fold's training part.
    pub leakage: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MeanSd {
    pub mean: Option<f64>,
    pub sd: Option<f64>,
    /// Folds in which the value was defined.
    pub n: usize,
}

impl MeanSd {
    /// Mean and sample standard deviation of the defined values.
    pub fn of(values: impl IntoIterator<Item = Option<f64>>) -> Self {
        let v: Vec<f64> = values.into_iter().flatten().collect();
        if v.is_empty() {
            return MeanSd {
                mean: None,
                sd: None,
                n: 0,
            };
        }
        let n = v.len() as f64;
        let mean = v.iter().sum::<f64>() / n;
        let sd = if v.len() > 1 {
            (v.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1.0)).sqrt()
        } else {
            0.0
        };
        MeanSd {
            mean: Some(mean),
            sd: Some(sd),
            n: v.len(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Aggregate {
    pub accuracy: MeanSd,
    /// class → metric name → summary.
    pub per_class: IndexMap<String, IndexMap<String, MeanSd>>,
}

pub fn aggregate(reports: &[MetricsReport]) -> Aggregate {
    let mut per_class = IndexMap::new();
    if let Some(first) = reports.first() {
        for (c, class) in first.class_names.iter().enumerate() {
            let mut m = IndexMap::new();
            let pick = |f: &dyn Fn(&super::metrics::ClassMetrics) -> Option<f64>| {
                MeanSd::of(reports.iter().map(|r| f(&r.per_class[c])))
            };
            m.insert("sensitivity".into(), pick(&|x| x.sensitivity.value));
            m.insert("specificity".into(), pick(&|x| x.specificity.value));
            m.insert("precision".into(), pick(&|x| x.precision.value));
            m.insert("f1".into(), pick(&|x| x.f1.value));
            m.insert("auc".into(), pick(&|x| x.auc.value));
            per_class.insert(class.clone(), m);
        }
    }
    Aggregate {
        accuracy: MeanSd::of(reports.iter().map(|r| Some(r.accuracy))),
        per_class,
    }
}

pub struct CvResult {
    pub plan: SplitPlan,
    pub folds: Vec<FoldResult>,
    pub aggregate: Aggregate,
}

impl CvResult {
    pub fn reports(&self) -> Vec<&MetricsReport> {
        self.folds.iter().map(|f| &f.metrics).collect()
    }
}

/// Model settings with the input length and class count taken from the
/// data.
pub fn resolve_model_config(cfg: &CvConfig, ds: &Dataset) -> Result<ModelConfig> {
    let points = match cfg.preprocess.crop {
        Some((start, end)) => ds
            .grid
            .index_range(start, end)
            .map(|(a, b)| b - a + 1)
            .ok_or_else(|| Error::Config("crop range contains no grid points".into()))?,
        None => ds.grid.points,
    };
    Ok(ModelConfig {
        input_length: cfg.preprocess.output_len(points),
        num_classes: ds.num_classes(),
        ..cfg.model.clone()
    })
}

fn run_fold(
    cfg: &CvConfig,
    model_cfg: &ModelConfig,
    ds: &Dataset,
    fold: usize,
    train_idx: &[usize],
    test_idx: &[usize],
) -> Result<FoldResult> {
    let seeds = FoldSeeds::new(cfg, fold);
    let train_pre = preprocess_dataset(&ds.subset(train_idx), &cfg.preprocess)?;
    let test_pre = preprocess_dataset(&ds.subset(test_idx), &cfg.preprocess)?;
    let augmented = augment_dataset(
        &train_pre,
        &AugmentConfig {
            seed: seeds.augment,
            ..cfg.augment.clone()
        },
    )?;
    let test_ids: HashSet<&str> = test_pre.spectra.iter().map(|s| s.id.as_str()).collect();
    let mut leakage = audit_partners(&augmented, &train_pre);
    leakage.extend(
        augmented
            .spectra
            .iter()
            .filter(|s| test_ids.contains(s.id.as_str()))
            .map(|s| s.id.clone()),
    );
    let (params, curves) = train(
        &ModelConfig {
            seed: seeds.model,
            ..model_cfg.clone()
        },
        &augmented,
        Some(&test_pre),
        &TrainConfig {
            seed: seeds.train,
            ..cfg.train.clone()
        },
    )?;
    let probs = predict(&params, &test_pre)?;
    let mut metrics = compute_metrics(&test_pre.label_indices(), &probs, &test_pre.class_names)?;
    metrics.fold = Some(fold);
    Ok(FoldResult {
        fold,
        seeds,
        metrics,
        curves,
        params,
        test: test_pre,
        train_size: train_idx.len(),
        augmented_size: augmented.len(),
        leakage,
    })
}

/// Runs every round of the configured split. Rounds run in parallel, each
/// with its own seeds, so the result does not depend on scheduling.
pub fn cross_validate(cfg: &CvConfig, ds: &Dataset) -> Result<CvResult> {
    if ds.spectra.iter().any(|s| s.origin.is_some()) {
        return Err(Error::Config(
            "cross-validation expects raw spectra; augmented records found".into(),
        ));
    }
    let model_cfg = resolve_model_config(cfg, ds)?;
    model_cfg.validate()?;
    let plan = make_splits(ds, cfg.split_mode, cfg.seed)?;
    let rounds = plan.rounds(ds)?;
    let folds = rounds
        .par_iter()
        .enumerate()
        .map(|(fold, (train_idx, test_idx))| {
            run_fold(cfg, &model_cfg, ds, fold, train_idx, test_idx).map_err(|e| Error::Fold {
                fold,
                source: Box::new(e),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let reports: Vec<MetricsReport> = folds.iter().map(|f| f.metrics.clone()).collect();
    Ok(CvResult {
        plan,
        folds,
        aggregate: aggregate(&reports),
    })
}

/// Copy of `ds` with labels randomly permuted across spectra.
pub fn permute_labels(ds: &Dataset, seed: u64) -> Dataset {
    let mut labels: Vec<String> = ds.spectra.iter().map(|s| s.label.clone()).collect();
    labels.shuffle(&mut crate::rng::stream(seed, 0));
    let spectra = ds
        .spectra
        .iter()
        .zip(labels)
        .map(|(s, label)| {
            let mut s = s.clone();
            s.label = label;
            s
        })
        .collect();
    ds.with_spectra(spectra)
}
