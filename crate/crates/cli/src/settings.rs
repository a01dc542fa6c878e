use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use seg_core::harness::{ProtocolConfig, SearchSpace};
use seg_core::{Error, ModelConfig, ModelKind, Result};

/// Everything a run depends on besides the dataset.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default)]
pub struct Settings {
    pub model: ModelConfig,
    pub protocol: ProtocolConfig,
    pub search: SearchSpace,
}

/// Reads a settings file. A report written by this tool is accepted as well,
/// in which case its embedded `settings` object is used.
pub fn load(path: &Path) -> Result<Settings> {
    let text = fs::read_to_string(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })?;
    let mut value: Value = serde_json::from_str(&text)
        .map_err(|e| Error::InvalidConfig(format!("{}: {e}", path.display())))?;
    if let Some(inner) = value.get_mut("settings") {
        value = inner.take();
    }
    serde_json::from_value(value).map_err(|e| Error::InvalidConfig(format!("{}: {e}", path.display())))
}

/// Reads a JSON value that is part of the configuration (grids and the like).
pub fn load_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })?;
    serde_json::from_str(&text).map_err(|e| Error::InvalidConfig(format!("{}: {e}", path.display())))
}

#[derive(Debug, Clone, Default, clap::Args)]
pub struct ModelArgs {
    /// Classifier: sgc or gcn.
    #[arg(long)]
    pub model: Option<ModelKind>,
    #[arg(long)]
    pub epochs: Option<usize>,
    #[arg(long)]
    pub hidden: Option<usize>,
    #[arg(long)]
    pub lr: Option<f64>,
    #[arg(long)]
    pub weight_decay: Option<f64>,
    #[arg(long)]
    pub dropout: Option<f64>,
    /// Model seed.
    #[arg(long)]
    pub seed: Option<u64>,
}

impl ModelArgs {
    pub fn apply(&self, cfg: &mut ModelConfig) {
        if let Some(kind) = self.model {
            cfg.kind = kind;
        }
        if let Some(v) = self.epochs {
            cfg.epochs = v;
        }
        if let Some(v) = self.hidden {
            cfg.hidden_dim = v;
        }
        if let Some(v) = self.lr {
            cfg.learning_rate = v;
        }
        if let Some(v) = self.weight_decay {
            cfg.weight_decay = v;
        }
        if let Some(v) = self.dropout {
            cfg.dropout = v;
        }
        if let Some(v) = self.seed {
            cfg.seed = v;
        }
    }
}

#[derive(Debug, Clone, Default, clap::Args)]
pub struct ProtocolArgs {
    #[arg(long)]
    pub train_per_class: Option<usize>,
    #[arg(long)]
    pub val_per_class: Option<usize>,
    #[arg(long)]
    pub splits: Option<usize>,
    #[arg(long)]
    pub seeds: Option<usize>,
    /// Seed for splits and per-run model seeds.
    #[arg(long)]
    pub master_seed: Option<u64>,
}

impl ProtocolArgs {
    pub fn apply(&self, p: &mut ProtocolConfig) {
        if let Some(v) = self.train_per_class {
            p.n_train_per_class = v;
        }
        if let Some(v) = self.val_per_class {
            p.n_val_per_class = v;
        }
        if let Some(v) = self.splits {
            p.n_splits = v;
        }
        if let Some(v) = self.seeds {
            p.n_seeds = v;
        }
        if let Some(v) = self.master_seed {
            p.master_seed = v;
        }
    }
}
