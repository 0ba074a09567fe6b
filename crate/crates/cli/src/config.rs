//! Run configuration file and the reproducibility manifest.

use std::path::{Path, PathBuf};

use ropesat::augment::AugmentConfig;
use ropesat::eval::{CvConfig, SplitMode};
use ropesat::explain::DenominatorMode;
use ropesat::model::{ModelConfig, TrainConfig};
use ropesat::preprocess::PreprocessConfig;
use ropesat::WavenumberGrid;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::CliError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub seed: u64,
    pub data: Option<PathBuf>,
    pub out_dir: Option<PathBuf>,
    pub profiles: Option<PathBuf>,
    pub bands: Option<PathBuf>,
    pub n_per_class: usize,
    pub grid: WavenumberGrid,
    pub preprocess: PreprocessConfig,
    pub augment: AugmentConfig,
    pub model: ModelConfig,
    pub train: TrainConfig,
    pub split_mode: SplitMode,
    pub betas: Vec<f64>,
    pub denominator_mode: DenominatorMode,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            seed: 0,
            data: None,
            out_dir: None,
            profiles: None,
            bands: None,
            n_per_class: 50,
            grid: WavenumberGrid::fingerprint(),
            preprocess: PreprocessConfig::default(),
            augment: AugmentConfig::default(),
            model: ModelConfig::default(),
            train: TrainConfig::default(),
            split_mode: SplitMode::Kfold5,
            betas: vec![0.2, 0.3, 0.4, 0.5],
            denominator_mode: DenominatorMode::WeightsInBand,
        }
    }
}

impl RunConfig {
    /// Reads a config file; relative paths inside it resolve against the
    /// file's directory.
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Validation(format!("{}: {e}", path.display())))?;
        let mut cfg: RunConfig = serde_json::from_str(&text)
            .map_err(|e| CliError::Validation(format!("{}: {e}", path.display())))?;
        let base = path.parent().unwrap_or(Path::new("."));
        for p in [&mut cfg.data, &mut cfg.out_dir, &mut cfg.profiles, &mut cfg.bands]
            .into_iter()
            .flatten()
        {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        }
        Ok(cfg)
    }

    pub fn load_or_default(path: Option<&Path>) -> Result<Self, CliError> {
        path.map_or_else(|| Ok(RunConfig::default()), RunConfig::load)
    }

    /// Checks every setting and that referenced input files exist.
    pub fn validate(&self) -> Result<(), CliError> {
        for (what, p) in [("data", &self.data), ("profiles", &self.profiles), ("bands", &self.bands)] {
            if let Some(p) = p {
                if !p.is_file() {
                    return Err(CliError::Validation(format!(
                        "{what} file {} does not exist",
                        p.display()
                    )));
                }
            }
        }
        if let Some(b) = self.betas.iter().find(|b| !(**b > 0.0 && **b < 1.0)) {
            return Err(CliError::Validation(format!("beta {b} must lie in (0, 1)")));
        }
        self.grid.validate()?;
        self.augment.validate()?;
        self.train.validate()?;
        self.model.sparse.validate()?;
        Ok(())
    }

    pub fn cv_config(&self) -> CvConfig {
        CvConfig {
            preprocess: self.preprocess.clone(),
            augment: self.augment.clone(),
            model: self.model.clone(),
            train: self.train.clone(),
            split_mode: self.split_mode,
            seed: self.seed,
        }
    }
}

/// Everything needed to reproduce an artifact.
pub fn manifest(command: &str, cfg: &RunConfig, extra: Value) -> Value {
    json!({
        "tool": "ropesat",
        "version": env!("CARGO_PKG_VERSION"),
        "command": command,
        "threads": rayon::current_num_threads(),
        "seeds": {
            "run": cfg.seed,
            "augment": cfg.augment.seed,
            "model": cfg.model.seed,
            "train": cfg.train.seed,
            "sparse_mask": cfg.model.sparse.seed,
        },
        "config": cfg,
        "extra": extra,
    })
}
