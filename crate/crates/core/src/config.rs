//! Run configuration.
//!
//! Configs are TOML. Every field has a default, unknown keys are rejected,
//! and [`RunConfig::validate`] reports every invalid field at once.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::quantum::MAX_QUBITS;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Aggregation {
    MeanLogits,
    AttentionPool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModelConfig {
    /// Data qubits `q`.
    pub qubits: usize,
    /// Window length `n`.
    pub window: usize,
    /// Window stride; defaults to `window` (non-overlapping).
    pub stride: Option<usize>,
    /// Embedding ansatz depth `ℓ`.
    pub layers: usize,
    /// Feed-forward ansatz depth.
    pub ff_layers: usize,
    /// Polynomial degree `d`.
    pub degree: usize,
    /// Token embedding dimension.
    pub embed_dim: usize,
    /// Head hidden width.
    pub hidden: usize,
    pub dropout: f64,
    pub classes: usize,
    pub aggregation: Aggregation,
    /// Optional keep-mask over the `3q` readout features.
    pub measurement_mask: Option<Vec<bool>>,
    /// Normalize LCU coefficients in the forward pass.
    pub normalize_lcu: bool,
    /// Scale of the random perturbation around the near-identity
    /// initialization of `b` and `c`; 0 gives the exact isotropic point.
    pub init_noise: f64,
}

impl Default for ModelConfig {
    fn default() -> Self {
        Self {
            qubits: 8,
            window: 16,
            stride: None,
            layers: 3,
            ff_layers: 6,
            degree: 5,
            embed_dim: 32,
            hidden: 64,
            dropout: 0.1,
            classes: 2,
            aggregation: Aggregation::MeanLogits,
            measurement_mask: None,
            normalize_lcu: true,
            init_noise: 1.0,
        }
    }
}

impl ModelConfig {
    pub fn stride(&self) -> usize {
        self.stride.unwrap_or(self.window)
    }

    pub fn features(&self) -> usize {
        3 * self.qubits
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LossConfig {
    pub lambda_ps: f64,
    pub tau: f64,
    pub lambda_l1: f64,
    pub lambda_qsvt_smooth: f64,
    pub lambda_qsvt_l2: f64,
}

impl Default for LossConfig {
    fn default() -> Self {
        Self {
            lambda_ps: 0.1,
            tau: 0.5,
            lambda_l1: 0.0,
            lambda_qsvt_smooth: 0.0,
            lambda_qsvt_l2: 0.0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OptimConfig {
    pub lr_max: f64,
    pub lr_min: f64,
    pub weight_decay: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub batch_size: usize,
    pub epochs: usize,
}

impl Default for OptimConfig {
    fn default() -> Self {
        Self {
            lr_max: 1e-3,
            lr_min: 1e-5,
            weight_decay: 0.01,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            batch_size: 32,
            epochs: 10,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SyntheticConfig {
    pub size: usize,
    pub length: usize,
    pub vocab_size: usize,
    pub seed: u64,
}

impl Default for SyntheticConfig {
    fn default() -> Self {
        Self {
            size: 2500,
            length: 8,
            vocab_size: 10,
            seed: 0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DataConfig {
    pub train: Option<PathBuf>,
    pub val: Option<PathBuf>,
    pub test: Option<PathBuf>,
    /// Generate the majority-token task instead of reading files.
    pub synthetic: Option<SyntheticConfig>,
    pub min_freq: Option<usize>,
    pub max_vocab: Option<usize>,
}

impl DataConfig {
    pub fn min_freq(&self) -> usize {
        self.min_freq.unwrap_or(2)
    }

    pub fn max_vocab(&self) -> usize {
        self.max_vocab.unwrap_or(20_000)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct VerifyConfig {
    pub seeds: usize,
}

impl Default for VerifyConfig {
    fn default() -> Self {
        Self { seeds: 50 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub seed: u64,
    pub workers: usize,
    pub out_dir: Option<PathBuf>,
    pub model: ModelConfig,
    pub loss: LossConfig,
    pub optim: OptimConfig,
    pub data: DataConfig,
    pub verify: VerifyConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            workers: 1,
            out_dir: None,
            model: ModelConfig::default(),
            loss: LossConfig::default(),
            optim: OptimConfig::default(),
            data: DataConfig::default(),
            verify: VerifyConfig::default(),
        }
    }
}

impl RunConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(vec![e.to_string()]))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut cfg = Self::from_toml_str(&text)?;
        cfg.resolve_paths(path.parent().unwrap_or(Path::new(".")));
        Ok(cfg)
    }

    /// Makes relative data paths relative to the config file's directory.
    fn resolve_paths(&mut self, base: &Path) {
        for p in [&mut self.data.train, &mut self.data.val, &mut self.data.test].into_iter().flatten() {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        }
    }

    /// Echo of the fully resolved config.
    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config is always serializable")
    }

    /// Checks the model and loss sections only.
    pub fn validate_model(&self) -> Result<()> {
        let errs = self.model_errors();
        if errs.is_empty() {
            Ok(())
        } else {
            Err(Error::Config(errs))
        }
    }

    fn model_errors(&self) -> Vec<String> {
        let mut errs = Vec::new();
        let m = &self.model;
        if m.qubits < 2 || m.qubits > MAX_QUBITS {
            errs.push(format!("model.qubits: {} not in 2..={MAX_QUBITS}", m.qubits));
        }
        if m.window < 1 {
            errs.push("model.window: must be at least 1".into());
        }
        if m.stride == Some(0) {
            errs.push("model.stride: must be at least 1".into());
        }
        if m.layers < 1 {
            errs.push("model.layers: must be at least 1".into());
        }
        if m.ff_layers < 1 {
            errs.push("model.ff_layers: must be at least 1".into());
        }
        if m.degree < 1 {
            errs.push("model.degree: must be at least 1".into());
        }
        if m.embed_dim < 1 {
            errs.push("model.embed_dim: must be at least 1".into());
        }
        if m.hidden < 1 {
            errs.push("model.hidden: must be at least 1".into());
        }
        if !(0.0..1.0).contains(&m.dropout) {
            errs.push(format!("model.dropout: {} not in [0, 1)", m.dropout));
        }
        if m.classes < 2 {
            errs.push("model.classes: need at least 2 classes".into());
        }
        if let Some(mask) = &m.measurement_mask {
            if mask.len() != 3 * m.qubits {
                errs.push(format!(
                    "model.measurement_mask: {} entries, expected 3·qubits = {}",
                    mask.len(),
                    3 * m.qubits
                ));
            }
        }
        if !(m.init_noise >= 0.0) {
            errs.push("model.init_noise: must be non-negative".into());
        }
        let l = &self.loss;
        if !(l.tau > 0.0 && l.tau < 1.0) {
            errs.push(format!("loss.tau: {} not in (0, 1)", l.tau));
        }
        for (name, v) in [
            ("loss.lambda_ps", l.lambda_ps),
            ("loss.lambda_l1", l.lambda_l1),
            ("loss.lambda_qsvt_smooth", l.lambda_qsvt_smooth),
            ("loss.lambda_qsvt_l2", l.lambda_qsvt_l2),
        ] {
            if !(v >= 0.0) {
                errs.push(format!("{name}: {v} must be non-negative"));
            }
        }
        if self.workers < 1 {
            errs.push("workers: must be at least 1".into());
        }
        errs
    }

    /// Full validation for training runs, including optimizer and data.
    pub fn validate(&self) -> Result<()> {
        let mut errs = self.model_errors();
        let o = &self.optim;
        if !(o.lr_max > 0.0) {
            errs.push(format!("optim.lr_max: {} must be positive", o.lr_max));
        }
        if !(o.lr_min >= 0.0 && o.lr_min <= o.lr_max) {
            errs.push(format!("optim.lr_min: {} must be in [0, lr_max]", o.lr_min));
        }
        if !(o.weight_decay >= 0.0) {
            errs.push("optim.weight_decay: must be non-negative".into());
        }
        if !(0.0..1.0).contains(&o.beta1) {
            errs.push("optim.beta1: must be in [0, 1)".into());
        }
        if !(0.0..1.0).contains(&o.beta2) {
            errs.push("optim.beta2: must be in [0, 1)".into());
        }
        if !(o.eps > 0.0) {
            errs.push("optim.eps: must be positive".into());
        }
        if o.batch_size < 1 {
            errs.push("optim.batch_size: must be at least 1".into());
        }
        let d = &self.data;
        match &d.synthetic {
            Some(s) => {
                if s.vocab_size < 2 {
                    errs.push("data.synthetic.vocab_size: must be at least 2".into());
                }
                if s.length < 1 {
                    errs.push("data.synthetic.length: must be at least 1".into());
                }
                if s.size < 10 {
                    errs.push("data.synthetic.size: need at least 10 examples for an 80/10/10 split".into());
                }
            }
            None => {
                if d.train.is_none() {
                    errs.push("data.train: missing path (or set data.synthetic)".into());
                }
                if d.val.is_none() {
                    errs.push("data.val: missing path (or set data.synthetic)".into());
                }
            }
        }
        if errs.is_empty() {
            Ok(())
        } else {
            Err(Error::Config(errs))
        }
    }
}
