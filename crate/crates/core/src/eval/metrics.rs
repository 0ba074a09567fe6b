//! Confusion matrix, one-vs-rest rates and ROC curves.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::network::argmax;

/// A rate that may be undefined, in which case `reason` says why.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Rate {
    pub value: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reason: Option<String>,
}

impl Rate {
    fn ratio(num: usize, den: usize, reason: &str) -> Rate {
        if den == 0 {
            Rate::undefined(reason)
        } else {
            Rate::of(num as f64 / den as f64)
        }
    }

    pub fn of(value: f64) -> Rate {
        Rate {
            value: Some(value),
            reason: None,
        }
    }

    pub fn undefined(reason: &str) -> Rate {
        Rate {
            value: None,
            reason: Some(reason.to_string()),
        }
    }
}

/// One-vs-rest statistics of a single class.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassMetrics {
    pub class: String,
    pub support: usize,
    pub tp: usize,
    pub fp: usize,
    pub tn: usize,
    pub fn_: usize,
    pub sensitivity: Rate,
    pub specificity: Rate,
    pub precision: Rate,
    pub f1: Rate,
    /// `(false positive rate, true positive rate)` from `(0, 0)` to `(1, 1)`.
    pub roc: Vec<(f64, f64)>,
    pub auc: Rate,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fold: Option<usize>,
    pub class_names: Vec<String>,
    /// `confusion[true][predicted]`.
    pub confusion: Vec<Vec<usize>>,
    pub accuracy: f64,
    pub n: usize,
    pub per_class: Vec<ClassMetrics>,
}

impl MetricsReport {
    pub fn class(&self, name: &str) -> Option<&ClassMetrics> {
        self.per_class.iter().find(|c| c.class == name)
    }
}

/// ROC points for scores where `positive[i]` marks the positive samples.
///
/// Thresholds sweep the distinct scores from high to low; a sample counts
/// as positive when its score is at least the threshold.
pub fn roc_curve(scores: &[f64], positive: &[bool]) -> Vec<(f64, f64)> {
    let p = positive.iter().filter(|&&b| b).count();
    let n = positive.len() - p;
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]));
    let mut points = vec![(0.0, 0.0)];
    let (mut tp, mut fp) = (0usize, 0usize);
    let mut i = 0;
    while i < order.len() {
        let s = scores[order[i]];
        while i < order.len() && scores[order[i]] == s {
            if positive[order[i]] {
                tp += 1;
            } else {
                fp += 1;
            }
            i += 1;
        }
        let fpr = if n > 0 { fp as f64 / n as f64 } else { 0.0 };
        let tpr = if p > 0 { tp as f64 / p as f64 } else { 0.0 };
        points.push((fpr, tpr));
    }
    points
}

/// Trapezoidal area under a polyline.
pub fn trapezoid_auc(points: &[(f64, f64)]) -> f64 {
    points
        .windows(2)
        .map(|w| (w[1].0 - w[0].0) * (w[1].1 + w[0].1) / 2.0)
        .sum()
}

pub fn compute_metrics(
    true_labels: &[usize],
    probabilities: &[Vec<f64>],
    class_names: &[String],
) -> Result<MetricsReport> {
    let k = class_names.len();
    if true_labels.is_empty() {
        return Err(Error::TooFewSamples("no predictions to score".into()));
    }
    if true_labels.len() != probabilities.len() {
        return Err(Error::LengthMismatch(format!(
            "{} labels but {} probability rows",
            true_labels.len(),
            probabilities.len()
        )));
    }
    for (i, (row, &y)) in probabilities.iter().zip(true_labels).enumerate() {
        if row.len() != k || y >= k {
            return Err(Error::Shape(format!(
                "row {i}: {} probabilities and label {y} for {k} classes",
                row.len()
            )));
        }
        let sum: f64 = row.iter().sum();
        if !((sum - 1.0).abs() <= 1e-6) || row.iter().any(|p| !p.is_finite()) {
            return Err(Error::Config(format!("row {i}: probabilities sum to {sum}")));
        }
    }
    let n = true_labels.len();
    let mut confusion = vec![vec![0usize; k]; k];
    for (row, &y) in probabilities.iter().zip(true_labels) {
        confusion[y][argmax(row)] += 1;
    }
    let trace: usize = (0..k).map(|c| confusion[c][c]).sum();
    let per_class = (0..k)
        .map(|c| {
            let tp = confusion[c][c];
            let fn_ = confusion[c].iter().sum::<usize>() - tp;
            let fp = (0..k).map(|r| confusion[r][c]).sum::<usize>() - tp;
            let tn = n - tp - fn_ - fp;
            let sensitivity = Rate::ratio(tp, tp + fn_, "no positive samples");
            let specificity = Rate::ratio(tn, tn + fp, "no negative samples");
            let precision = Rate::ratio(tp, tp + fp, "class never predicted");
            let f1 = match (&sensitivity.value, &precision.value) {
                (Some(_), Some(_)) => Rate::of(2.0 * tp as f64 / (2 * tp + fp + fn_) as f64),
                _ => Rate::undefined("precision or sensitivity undefined"),
            };
            let scores: Vec<f64> = probabilities.iter().map(|r| r[c]).collect();
            let positive: Vec<bool> = true_labels.iter().map(|&y| y == c).collect();
            let roc = roc_curve(&scores, &positive);
            let auc = if tp + fn_ == 0 {
                Rate::undefined("no positive samples")
            } else if tn + fp == 0 {
                Rate::undefined("no negative samples")
            } else {
                Rate::of(trapezoid_auc(&roc))
            };
            ClassMetrics {
                class: class_names[c].clone(),
                support: tp + fn_,
                tp,
                fp,
                tn,
                fn_,
                sensitivity,
                specificity,
                precision,
                f1,
                roc,
                auc,
            }
        })
        .collect();
    Ok(MetricsReport {
        fold: None,
        class_names: class_names.to_vec(),
        confusion,
        accuracy: trace as f64 / n as f64,
        n,
        per_class,
    })
}
