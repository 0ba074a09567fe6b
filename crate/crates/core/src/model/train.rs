//! Mini-batch training with adaptive moment estimation.

use std::fmt::Write as _;
use std::path::Path;

use indexmap::IndexMap;
use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use super::network::{argmax, batch_tensor, forward, loss_and_grads, update_running_stats, Mode};
use super::{ModelConfig, ModelParams};
use crate::error::{Error, Result};
use crate::spectra::Dataset;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub batch_size: usize,
    pub epochs: usize,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            learning_rate: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            batch_size: 32,
            epochs: 50,
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let ok = self.learning_rate >= 0.0
            && self.learning_rate.is_finite()
            && (0.0..1.0).contains(&self.beta1)
            && (0.0..1.0).contains(&self.beta2)
            && self.eps > 0.0
            && self.batch_size >= 1;
        if ok {
            Ok(())
        } else {
            Err(Error::Config(format!("invalid training settings: {self:?}")))
        }
    }
}

/// First and second moment estimates for every learnable tensor.
pub struct Adam {
    cfg: TrainConfig,
    m: Vec<Vec<f64>>,
    v: Vec<Vec<f64>>,
    step: i32,
}

impl Adam {
    pub fn new(params: &ModelParams, cfg: &TrainConfig) -> Self {
        let zeros: Vec<Vec<f64>> = params.tensors.values().map(|t| vec![0.0; t.len()]).collect();
        Adam {
            cfg: cfg.clone(),
            m: zeros.clone(),
            v: zeros,
            step: 0,
        }
    }

    pub fn step(&mut self, params: &mut ModelParams, grads: &IndexMap<String, Vec<f64>>) {
        self.step += 1;
        let c = &self.cfg;
        let bc1 = 1.0 - c.beta1.powi(self.step);
        let bc2 = 1.0 - c.beta2.powi(self.step);
        for (((t, g), m), v) in params
            .tensors
            .values_mut()
            .zip(grads.values())
            .zip(&mut self.m)
            .zip(&mut self.v)
        {
            for i in 0..t.data.len() {
                m[i] = c.beta1 * m[i] + (1.0 - c.beta1) * g[i];
                v[i] = c.beta2 * v[i] + (1.0 - c.beta2) * g[i] * g[i];
                let mhat = m[i] / bc1;
                let vhat = v[i] / bc2;
                t.data[i] -= c.learning_rate * mhat / (vhat.sqrt() + c.eps);
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub train_loss: f64,
    pub train_acc: f64,
    pub val_loss: Option<f64>,
    pub val_acc: Option<f64>,
}

fn check_dataset(cfg: &ModelConfig, ds: &Dataset, what: &str) -> Result<()> {
    if ds.grid.points != cfg.input_length {
        return Err(Error::Config(format!(
            "{what} spectra have {} points but input_length is {}",
            ds.grid.points, cfg.input_length
        )));
    }
    if ds.num_classes() != cfg.num_classes {
        return Err(Error::Config(format!(
            "{what} set has {} classes but the model has {}",
            ds.num_classes(),
            cfg.num_classes
        )));
    }
    Ok(())
}

/// Mean cross-entropy and accuracy in inference mode.
pub fn evaluate(params: &ModelParams, ds: &Dataset) -> Result<(f64, f64)> {
    let labels = ds.label_indices();
    let idx: Vec<usize> = (0..ds.len()).collect();
    let (mut loss, mut correct) = (0.0, 0usize);
    for chunk in idx.chunks(64) {
        let fw = forward(params, &batch_tensor(ds, chunk), Mode::Infer)?;
        let z = fw.logits();
        for (r, &i) in chunk.iter().enumerate() {
            let row = z.row(r);
            let max = row.iter().fold(f64::NEG_INFINITY, |a, &b| a.max(b));
            let lse = max + row.iter().map(|v| (v - max).exp()).sum::<f64>().ln();
            loss += lse - row[labels[i]];
            correct += usize::from(argmax(row) == labels[i]);
        }
    }
    let n = ds.len().max(1) as f64;
    Ok((loss / n, correct as f64 / n))
}

/// Trains a freshly initialized model.
pub fn train(
    model_cfg: &ModelConfig,
    train_ds: &Dataset,
    val_ds: Option<&Dataset>,
    cfg: &TrainConfig,
) -> Result<(ModelParams, Vec<EpochRecord>)> {
    let params = ModelParams::init(model_cfg)?;
    train_from(params, train_ds, val_ds, cfg)
}

/// Continues training from the given parameters.
pub fn train_from(
    mut params: ModelParams,
    train_ds: &Dataset,
    val_ds: Option<&Dataset>,
    cfg: &TrainConfig,
) -> Result<(ModelParams, Vec<EpochRecord>)> {
    cfg.validate()?;
    check_dataset(&params.config, train_ds, "training")?;
    if let Some(v) = val_ds {
        check_dataset(&params.config, v, "validation")?;
        if v.class_names != train_ds.class_names {
            return Err(Error::Config(
                "training and validation class lists differ".into(),
            ));
        }
    }
    if train_ds.len() < 2 {
        return Err(Error::TooFewSamples(format!(
            "training needs at least 2 spectra, got {}",
            train_ds.len()
        )));
    }
    let labels = train_ds.label_indices();
    let tokens = params.config.tokens();
    let mut adam = Adam::new(&params, cfg);
    let mut order: Vec<usize> = (0..train_ds.len()).collect();
    let mut curves = Vec::with_capacity(cfg.epochs);
    for epoch in 1..=cfg.epochs {
        let mut rng = crate::rng::stream(crate::rng::derive_seed(cfg.seed, 0x5487), epoch as u64);
        order.shuffle(&mut rng);
        let (mut loss_sum, mut correct, mut seen) = (0.0, 0usize, 0usize);
        for batch in order.chunks(cfg.batch_size) {
            // batch statistics need at least two rows
            if batch.len() < 2 {
                continue;
            }
            let y: Vec<usize> = batch.iter().map(|&i| labels[i]).collect();
            let lg = match loss_and_grads(&params, &batch_tensor(train_ds, batch), &y) {
                Ok(lg) => lg,
                Err(Error::NonFiniteActivation(_)) => {
                    return Err(Error::Diverged {
                        epoch,
                        loss: f64::NAN,
                    })
                }
                Err(e) => return Err(e),
            };
            if !lg.loss.is_finite() {
                return Err(Error::Diverged {
                    epoch,
                    loss: lg.loss,
                });
            }
            loss_sum += lg.loss * batch.len() as f64;
            seen += batch.len();
            correct += y
                .iter()
                .enumerate()
                .filter(|&(r, &yi)| argmax(lg.logits.row(r)) == yi)
                .count();
            adam.step(&mut params, &lg.grads);
            if let Some(stats) = &lg.batch_stats {
                update_running_stats(&mut params, stats, batch.len() * tokens);
            }
        }
        let (val_loss, val_acc) = match val_ds {
            Some(v) if !v.is_empty() => {
                let (l, a) = evaluate(&params, v)?;
                (Some(l), Some(a))
            }
            _ => (None, None),
        };
        let n = seen.max(1) as f64;
        curves.push(EpochRecord {
            epoch,
            train_loss: loss_sum / n,
            train_acc: correct as f64 / n,
            val_loss,
            val_acc,
        });
    }
    Ok((params, curves))
}

/// Curves as CSV text; missing validation values are left empty.
pub fn curves_csv(curves: &[EpochRecord]) -> String {
    let mut out = String::from("epoch,train_loss,train_acc,val_loss,val_acc\n");
    let opt = |v: Option<f64>| v.map(|x| format!("{x:.17e}")).unwrap_or_default();
    for r in curves {
        let _ = writeln!(
            out,
            "{},{:.17e},{:.17e},{},{}",
            r.epoch,
            r.train_loss,
            r.train_acc,
            opt(r.val_loss),
            opt(r.val_acc)
        );
    }
    out
}

pub fn write_curves_csv(curves: &[EpochRecord], path: &Path) -> Result<()> {
    std::fs::write(path, curves_csv(curves)).map_err(|e| Error::io(path, e))
}
