//! The RoPE sparse-attention transformer: configuration, parameters,
//! differentiation tape, forward pass, training and checkpoints.

pub mod checkpoint;
pub mod mask;
pub mod network;
pub mod rope;
pub mod tape;
pub mod tensor;
pub mod train;

use std::sync::Arc;

use indexmap::IndexMap;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use mask::{build_sparse_mask, SparseConfig, SparseMask};
pub use network::{forward, loss_and_grads, predict, Forward, Mode};
pub use rope::{rope_rotate, RopeTable};
pub use tensor::Tensor;
pub use train::{train, Adam, EpochRecord, TrainConfig};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ModelConfig {
    pub input_length: usize,
    pub embed_kernel: usize,
    pub embed_stride: usize,
    pub embed_dim: usize,
    pub num_heads: usize,
    pub num_encoder_blocks: usize,
    pub ff_multiplier: usize,
    pub rope_base: f64,
    pub sparse: SparseConfig,
    pub head_conv_channels: usize,
    pub head_conv_kernel: usize,
    pub fc_hidden: usize,
    pub num_classes: usize,
    pub seed: u64,
}

impl Default for ModelConfig {
    fn default() -> Self {
        ModelConfig {
            input_length: 217,
            embed_kernel: 4,
            embed_stride: 4,
            embed_dim: 64,
            num_heads: 4,
            num_encoder_blocks: 2,
            ff_multiplier: 2,
            rope_base: 10_000.0,
            sparse: SparseConfig::default(),
            head_conv_channels: 32,
            head_conv_kernel: 3,
            fc_hidden: 64,
            num_classes: 3,
            seed: 0,
        }
    }
}

impl ModelConfig {
    /// Token count after the strided embedding convolution.
    pub fn tokens(&self) -> usize {
        if self.input_length < self.embed_kernel || self.embed_stride == 0 {
            return 0;
        }
        (self.input_length - self.embed_kernel) / self.embed_stride + 1
    }

    pub fn head_dim(&self) -> usize {
        self.embed_dim / self.num_heads.max(1)
    }

    pub fn validate(&self) -> Result<()> {
        let fail = |m: String| Err(Error::Config(m));
        if self.num_heads == 0 || self.embed_dim % self.num_heads != 0 {
            return fail(format!(
                "embed_dim {} is not divisible by num_heads {}",
                self.embed_dim, self.num_heads
            ));
        }
        if self.head_dim() % 2 != 0 || self.head_dim() == 0 {
            return fail(format!("head dimension {} must be even", self.head_dim()));
        }
        if self.embed_kernel == 0 || self.embed_stride == 0 {
            return fail("embedding kernel and stride must be positive".into());
        }
        if self.tokens() < 4 {
            return fail(format!(
                "input_length {} yields {} tokens; at least 4 are needed",
                self.input_length,
                self.tokens()
            ));
        }
        if self.head_conv_kernel % 2 == 0 {
            return fail(format!(
                "head_conv_kernel {} must be odd to keep the token count",
                self.head_conv_kernel
            ));
        }
        if self.num_classes < 2 {
            return fail(format!("need at least 2 classes, got {}", self.num_classes));
        }
        if self.head_conv_channels == 0 || self.fc_hidden == 0 || self.ff_multiplier == 0 {
            return fail("layer widths must be positive".into());
        }
        if !(self.rope_base > 0.0) {
            return fail(format!("rope_base must be positive, got {}", self.rope_base));
        }
        self.sparse.validate()
    }
}

/// Learnable tensors in a fixed order, batch-norm running statistics and
/// the derived attention mask and rotation table.
#[derive(Debug, Clone)]
pub struct ModelParams {
    pub config: ModelConfig,
    pub tensors: IndexMap<String, Tensor>,
    pub running_mean: Vec<f64>,
    pub running_var: Vec<f64>,
    mask: Arc<SparseMask>,
    rope: Arc<RopeTable>,
}

impl ModelParams {
    /// Shapes of every learnable tensor, in parameter order.
    pub fn layout(cfg: &ModelConfig) -> Vec<(String, Vec<usize>)> {
        let d = cfg.embed_dim;
        let f = d * cfg.ff_multiplier;
        let c = cfg.head_conv_channels;
        let mut out = vec![
            ("embed.weight".to_string(), vec![cfg.embed_kernel, d]),
            ("embed.bias".to_string(), vec![d]),
        ];
        for b in 0..cfg.num_encoder_blocks {
            let p = |s: &str| format!("blocks.{b}.{s}");
            out.extend([
                (p("ln1.gamma"), vec![d]),
                (p("ln1.beta"), vec![d]),
                (p("attn.wq"), vec![d, d]),
                (p("attn.bq"), vec![d]),
                (p("attn.wk"), vec![d, d]),
                (p("attn.bk"), vec![d]),
                (p("attn.wv"), vec![d, d]),
                (p("attn.bv"), vec![d]),
                (p("attn.wo"), vec![d, d]),
                (p("attn.bo"), vec![d]),
                (p("ln2.gamma"), vec![d]),
                (p("ln2.beta"), vec![d]),
                (p("ff.w1"), vec![d, f]),
                (p("ff.b1"), vec![f]),
                (p("ff.w2"), vec![f, d]),
                (p("ff.b2"), vec![d]),
            ]);
        }
        out.extend([
            ("head.conv.weight".to_string(), vec![cfg.head_conv_kernel * d, c]),
            ("head.conv.bias".to_string(), vec![c]),
            ("head.bn.gamma".to_string(), vec![c]),
            ("head.bn.beta".to_string(), vec![c]),
            ("fc1.weight".to_string(), vec![cfg.tokens() * c, cfg.fc_hidden]),
            ("fc1.bias".to_string(), vec![cfg.fc_hidden]),
            ("fc2.weight".to_string(), vec![cfg.fc_hidden, cfg.num_classes]),
            ("fc2.bias".to_string(), vec![cfg.num_classes]),
        ]);
        out
    }

    /// Seeded initialization: weight matrices uniform in `±1/sqrt(fan_in)`,
    /// biases zero, normalization scales one and shifts zero.
    pub fn init(cfg: &ModelConfig) -> Result<Self> {
        cfg.validate()?;
        let mut rng = crate::rng::stream(crate::rng::derive_seed(cfg.seed, 0x1417), 0);
        let mut tensors = IndexMap::new();
        for (name, shape) in Self::layout(cfg) {
            let t = if name.ends_with(".gamma") {
                Tensor::filled(shape, 1.0)
            } else if shape.len() == 2 {
                let bound = 1.0 / (shape[0] as f64).sqrt();
                let n = shape[0] * shape[1];
                let data = (0..n).map(|_| rng.random_range(-bound..bound)).collect();
                Tensor::new(shape, data)
            } else {
                Tensor::zeros(shape)
            };
            tensors.insert(name, t);
        }
        let c = cfg.head_conv_channels;
        Self::from_parts(cfg.clone(), tensors, vec![0.0; c], vec![1.0; c])
    }

    /// Assembles parameters from stored tensors, checking names and shapes.
    pub fn from_parts(
        config: ModelConfig,
        tensors: IndexMap<String, Tensor>,
        running_mean: Vec<f64>,
        running_var: Vec<f64>,
    ) -> Result<Self> {
        config.validate()?;
        let layout = Self::layout(&config);
        if layout.len() != tensors.len() {
            return Err(Error::Shape(format!(
                "expected {} tensors, found {}",
                layout.len(),
                tensors.len()
            )));
        }
        let mut ordered = IndexMap::with_capacity(layout.len());
        for (name, shape) in layout {
            let t = tensors
                .get(&name)
                .ok_or_else(|| Error::Shape(format!("missing tensor `{name}`")))?;
            if t.shape != shape {
                return Err(Error::Shape(format!(
                    "tensor `{name}` has shape {:?}, expected {shape:?}",
                    t.shape
                )));
            }
            if !t.is_finite() {
                return Err(Error::Shape(format!("tensor `{name}` is not finite")));
            }
            ordered.insert(name, t.clone());
        }
        let c = config.head_conv_channels;
        if running_mean.len() != c || running_var.len() != c {
            return Err(Error::Shape("batch-norm running statistics length".into()));
        }
        if running_var.iter().any(|v| !(*v > 0.0) || !v.is_finite())
            || running_mean.iter().any(|v| !v.is_finite())
        {
            return Err(Error::Shape(
                "batch-norm running variance must be positive and finite".into(),
            ));
        }
        let mask = Arc::new(build_sparse_mask(config.tokens(), &config.sparse));
        let rope = Arc::new(RopeTable::new(
            config.tokens(),
            config.head_dim(),
            config.rope_base,
        )?);
        Ok(ModelParams {
            config,
            tensors: ordered,
            running_mean,
            running_var,
            mask,
            rope,
        })
    }

    pub fn mask(&self) -> &SparseMask {
        &self.mask
    }

    pub(crate) fn mask_arc(&self) -> Arc<SparseMask> {
        Arc::clone(&self.mask)
    }

    pub(crate) fn rope_arc(&self) -> Arc<RopeTable> {
        Arc::clone(&self.rope)
    }

    pub fn get(&self, name: &str) -> Option<&Tensor> {
        self.tensors.get(name)
    }

    pub fn get_mut(&mut self, name: &str) -> Option<&mut Tensor> {
        self.tensors.get_mut(name)
    }

    pub fn num_parameters(&self) -> usize {
        self.tensors.values().map(Tensor::len).sum()
    }

    /// Zeros the output layer so every logit is exactly zero.
    pub fn zero_final_layer(&mut self) {
        for name in ["fc2.weight", "fc2.bias"] {
            if let Some(t) = self.tensors.get_mut(name) {
                t.data.iter_mut().for_each(|v| *v = 0.0);
            }
        }
    }
}
