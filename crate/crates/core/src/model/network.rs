//! Forward pass, loss gradients and inference.

use std::sync::Arc;

use indexmap::IndexMap;

use super::tape::{column_stats, softmax, HeadLayout, Tape, UnfoldSpec, Var};
use super::{ModelParams, Tensor};
use crate::error::{Error, Result};
use crate::spectra::Dataset;

const BN_MOMENTUM: f64 = 0.1;
const PREDICT_CHUNK: usize = 64;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    /// Batch normalization uses the statistics of the current batch.
    Train,
    /// Batch normalization uses the running statistics.
    Infer,
}

/// A recorded forward pass.
pub struct Forward {
    pub tape: Tape,
    pub logits: Var,
    /// Rectified output of the head convolution, `[batch * tokens, channels]`.
    pub head_activation: Var,
    /// One leaf per learnable tensor, in parameter order.
    pub param_vars: Vec<Var>,
    /// Batch mean and population variance seen by batch normalization in
    /// train mode.
    pub batch_stats: Option<(Vec<f64>, Vec<f64>)>,
    pub batch: usize,
}

impl Forward {
    pub fn logits(&self) -> &Tensor {
        self.tape.value(self.logits)
    }

    pub fn head_activation(&self) -> &Tensor {
        self.tape.value(self.head_activation)
    }
}

fn check(tape: &Tape, v: Var, layer: &str) -> Result<Var> {
    if tape.value(v).is_finite() {
        Ok(v)
    } else {
        Err(Error::NonFiniteActivation(layer.to_string()))
    }
}

/// Stacks the given spectra into a `[n, points]` input tensor.
pub fn batch_tensor(ds: &Dataset, indices: &[usize]) -> Tensor {
    let p = ds.grid.points;
    let mut data = Vec::with_capacity(indices.len() * p);
    for &i in indices {
        data.extend_from_slice(&ds.spectra[i].values);
    }
    Tensor::new(vec![indices.len(), p], data)
}

/// Runs the network on a `[batch, input_length]` tensor.
pub fn forward(params: &ModelParams, input: &Tensor, mode: Mode) -> Result<Forward> {
    let cfg = &params.config;
    let (b, len) = (input.rows(), input.cols());
    if input.shape.len() != 2 || len != cfg.input_length {
        return Err(Error::Shape(format!(
            "input has shape {:?}, model expects [batch, {}]",
            input.shape, cfg.input_length
        )));
    }
    if b == 0 {
        return Err(Error::Shape("empty batch".into()));
    }
    if !input.is_finite() {
        return Err(Error::NonFiniteActivation("input".into()));
    }
    let t = cfg.tokens();
    let d = cfg.embed_dim;
    let c = cfg.head_conv_channels;
    let mut tape = Tape::new();
    let param_vars: Vec<Var> = params.tensors.values().map(|w| tape.leaf(w.clone())).collect();
    let p: IndexMap<&str, Var> = params
        .tensors
        .keys()
        .map(String::as_str)
        .zip(param_vars.iter().copied())
        .collect();

    let x = tape.leaf(input.clone());
    let cols = tape.unfold(
        x,
        UnfoldSpec {
            batch: b,
            len,
            channels: 1,
            kernel: cfg.embed_kernel,
            stride: cfg.embed_stride,
            pad: 0,
        },
    );
    let mut h = tape.linear(cols, p["embed.weight"], p["embed.bias"]);
    h = check(&tape, h, "embed")?;

    let layout = HeadLayout {
        batch: b,
        seq: t,
        heads: cfg.num_heads,
    };
    let scale = 1.0 / (cfg.head_dim() as f64).sqrt();
    let mask = params.mask_arc();
    let rope = params.rope_arc();
    for blk in 0..cfg.num_encoder_blocks {
        let w = |s: &str| p[format!("blocks.{blk}.{s}").as_str()];
        let n1 = tape.layer_norm(h, w("ln1.gamma"), w("ln1.beta"));
        let q = tape.linear(n1, w("attn.wq"), w("attn.bq"));
        let k = tape.linear(n1, w("attn.wk"), w("attn.bk"));
        let v = tape.linear(n1, w("attn.wv"), w("attn.bv"));
        let q = tape.rope(q, cfg.num_heads, Arc::clone(&rope));
        let k = tape.rope(k, cfg.num_heads, Arc::clone(&rope));
        let scores = tape.attn_scores(q, k, layout, scale);
        let probs = tape.masked_softmax(scores, Arc::clone(&mask));
        let mixed = tape.attn_mix(probs, v, layout);
        let attn = tape.linear(mixed, w("attn.wo"), w("attn.bo"));
        h = tape.add(h, attn);
        h = check(&tape, h, &format!("blocks.{blk}.attn"))?;
        let n2 = tape.layer_norm(h, w("ln2.gamma"), w("ln2.beta"));
        let f = tape.linear(n2, w("ff.w1"), w("ff.b1"));
        let f = tape.relu(f);
        let f = tape.linear(f, w("ff.w2"), w("ff.b2"));
        h = tape.add(h, f);
        h = check(&tape, h, &format!("blocks.{blk}.ff"))?;
    }

    let cols = tape.unfold(
        h,
        UnfoldSpec {
            batch: b,
            len: t,
            channels: d,
            kernel: cfg.head_conv_kernel,
            stride: 1,
            pad: cfg.head_conv_kernel / 2,
        },
    );
    let conv = tape.linear(cols, p["head.conv.weight"], p["head.conv.bias"]);
    let conv = check(&tape, conv, "head.conv")?;
    let (running, batch_stats) = match mode {
        Mode::Train => (None, Some(column_stats(tape.value(conv)))),
        Mode::Infer => (
            Some(Arc::new((params.running_mean.clone(), params.running_var.clone()))),
            None,
        ),
    };
    let bn = tape.batch_norm(conv, p["head.bn.gamma"], p["head.bn.beta"], running);
    let act = tape.relu(bn);
    let act = check(&tape, act, "head.bn")?;
    let flat = tape.reshape(act, vec![b, t * c]);
    let hidden = tape.linear(flat, p["fc1.weight"], p["fc1.bias"]);
    let hidden = tape.relu(hidden);
    let hidden = check(&tape, hidden, "fc1")?;
    let logits = tape.linear(hidden, p["fc2.weight"], p["fc2.bias"]);
    let logits = check(&tape, logits, "fc2")?;
    Ok(Forward {
        tape,
        logits,
        head_activation: act,
        param_vars,
        batch_stats,
        batch: b,
    })
}

/// Mean cross-entropy of one batch with a gradient for every learnable
/// tensor.
pub struct LossGrads {
    pub loss: f64,
    pub grads: IndexMap<String, Vec<f64>>,
    pub logits: Tensor,
    pub batch_stats: Option<(Vec<f64>, Vec<f64>)>,
}

pub fn loss_and_grads(params: &ModelParams, input: &Tensor, labels: &[usize]) -> Result<LossGrads> {
    loss_and_grads_in(params, input, labels, Mode::Train)
}

pub fn loss_and_grads_in(
    params: &ModelParams,
    input: &Tensor,
    labels: &[usize],
    mode: Mode,
) -> Result<LossGrads> {
    if labels.len() != input.rows() {
        return Err(Error::Shape(format!(
            "{} labels for a batch of {}",
            labels.len(),
            input.rows()
        )));
    }
    if let Some(&bad) = labels.iter().find(|&&y| y >= params.config.num_classes) {
        return Err(Error::Config(format!(
            "label index {bad} out of range for {} classes",
            params.config.num_classes
        )));
    }
    let mut fw = forward(params, input, mode)?;
    let loss_var = fw.tape.cross_entropy(fw.logits, Arc::new(labels.to_vec()));
    let loss = fw.tape.value(loss_var).data[0];
    let g = fw.tape.backward(loss_var, vec![1.0]);
    let grads = params
        .tensors
        .iter()
        .zip(&fw.param_vars)
        .map(|((name, t), &v)| (name.clone(), g.get_or_zero(v, t.len())))
        .collect();
    Ok(LossGrads {
        loss,
        grads,
        logits: fw.logits().clone(),
        batch_stats: fw.batch_stats.take(),
    })
}

/// Folds one batch's statistics into the running estimates. The variance
/// is converted to its unbiased form first.
pub fn update_running_stats(params: &mut ModelParams, stats: &(Vec<f64>, Vec<f64>), rows: usize) {
    let correction = if rows > 1 {
        rows as f64 / (rows - 1) as f64
    } else {
        1.0
    };
    for (r, m) in params.running_mean.iter_mut().zip(&stats.0) {
        *r = (1.0 - BN_MOMENTUM) * *r + BN_MOMENTUM * m;
    }
    for (r, v) in params.running_var.iter_mut().zip(&stats.1) {
        *r = (1.0 - BN_MOMENTUM) * *r + BN_MOMENTUM * v * correction;
    }
}

/// Softmax probabilities for a `[n, input_length]` tensor in inference mode.
pub fn predict_tensor(params: &ModelParams, input: &Tensor) -> Result<Vec<Vec<f64>>> {
    let fw = forward(params, input, Mode::Infer)?;
    let z = fw.logits();
    Ok((0..z.rows()).map(|r| softmax(z.row(r))).collect())
}

/// Per-spectrum class probabilities in inference mode.
pub fn predict(params: &ModelParams, ds: &Dataset) -> Result<Vec<Vec<f64>>> {
    if ds.grid.points != params.config.input_length {
        return Err(Error::Shape(format!(
            "dataset has {} points, model expects {}",
            ds.grid.points, params.config.input_length
        )));
    }
    let idx: Vec<usize> = (0..ds.len()).collect();
    let mut out = Vec::with_capacity(ds.len());
    for chunk in idx.chunks(PREDICT_CHUNK) {
        out.extend(predict_tensor(params, &batch_tensor(ds, chunk))?);
    }
    Ok(out)
}

/// Index of the largest entry; ties go to the lowest index.
pub fn argmax(row: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in row.iter().enumerate() {
        if v > row[best] {
            best = i;
        }
    }
    best
}
