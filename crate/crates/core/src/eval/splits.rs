//! Stratified hold-out and k-fold splits.

use indexmap::IndexMap;
use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::spectra::Dataset;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub enum SplitMode {
    #[serde(rename = "holdout_80_20")]
    Holdout8020,
    #[default]
    #[serde(rename = "kfold_5")]
    Kfold5,
}

impl SplitMode {
    pub fn as_str(self) -> &'static str {
        match self {
            SplitMode::Holdout8020 => "holdout_80_20",
            SplitMode::Kfold5 => "kfold_5",
        }
    }

    /// Number of train/test rounds the mode produces.
    pub fn rounds(self) -> usize {
        match self {
            SplitMode::Holdout8020 => 1,
            SplitMode::Kfold5 => 5,
        }
    }
}

/// Fold index per spectrum id. For hold-out plans fold 1 is the test set
/// and fold 0 the training set.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SplitPlan {
    pub mode: SplitMode,
    pub seed: u64,
    pub stratified: bool,
    pub num_folds: usize,
    pub assignments: IndexMap<String, usize>,
}

impl SplitPlan {
    /// Fold of every spectrum of `ds`, in dataset order.
    pub fn folds_for(&self, ds: &Dataset) -> Result<Vec<usize>> {
        ds.spectra
            .iter()
            .map(|s| {
                self.assignments
                    .get(&s.id)
                    .copied()
                    .ok_or_else(|| Error::Config(format!("spectrum `{}` is not in the split plan", s.id)))
            })
            .collect()
    }

    /// `(train, test)` index lists of each round.
    pub fn rounds(&self, ds: &Dataset) -> Result<Vec<(Vec<usize>, Vec<usize>)>> {
        let folds = self.folds_for(ds)?;
        let test_folds: Vec<usize> = match self.mode {
            SplitMode::Holdout8020 => vec![1],
            SplitMode::Kfold5 => (0..self.num_folds).collect(),
        };
        Ok(test_folds
            .into_iter()
            .map(|f| {
                let (test, train): (Vec<usize>, Vec<usize>) = (0..ds.len()).partition(|&i| folds[i] == f);
                (train, test)
            })
            .collect())
    }
}

/// Stratified split: each class is shuffled with its own stream, then
/// dealt round-robin into folds (k-fold) or cut 80/20 (hold-out).
pub fn make_splits(ds: &Dataset, mode: SplitMode, seed: u64) -> Result<SplitPlan> {
    let mut seen = std::collections::HashSet::new();
    if let Some(dup) = ds.spectra.iter().find(|s| !seen.insert(s.id.as_str())) {
        return Err(Error::Config(format!("duplicate spectrum id `{}`", dup.id)));
    }
    let labels = ds.label_indices();
    let mut fold = vec![0usize; ds.len()];
    let mut dealt = 0usize;
    for (c, class) in ds.class_names.iter().enumerate() {
        let mut members: Vec<usize> = (0..ds.len()).filter(|&i| labels[i] == c).collect();
        let needed = match mode {
            SplitMode::Kfold5 => 5,
            SplitMode::Holdout8020 => 2,
        };
        if members.len() < needed {
            return Err(Error::TooFewSamples(format!(
                "class `{class}` has {} spectra; {} needs at least {needed}",
                members.len(),
                mode.as_str()
            )));
        }
        members.shuffle(&mut crate::rng::stream(seed, c as u64));
        match mode {
            SplitMode::Kfold5 => {
                for &i in &members {
                    fold[i] = dealt % 5;
                    dealt += 1;
                }
            }
            SplitMode::Holdout8020 => {
                let n_test = ((members.len() as f64 * 0.2).round() as usize).max(1);
                for (pos, &i) in members.iter().enumerate() {
                    fold[i] = usize::from(pos < n_test);
                }
            }
        }
    }
    Ok(SplitPlan {
        mode,
        seed,
        stratified: true,
        num_folds: mode.rounds().max(2),
        assignments: ds.spectra.iter().map(|s| s.id.clone()).zip(fold).collect(),
    })
}
