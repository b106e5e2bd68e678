//! Flat `key = value` run configuration with flag overrides.

use std::fs;
use std::path::{Path, PathBuf};

use clap::Args;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use cslm::model::{ModelConfig, ModelMode};
use cslm::trainer::TrainConfig;

use crate::{CliResult, Failure};

/// Every key accepted by `train --config` and `sweep --config`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    /// Directory holding `{train,dev,test}.{words,tags}`.
    pub data: PathBuf,
    pub out: PathBuf,
    pub min_count: usize,
    pub hidden: usize,
    pub layers: usize,
    pub dropout_word: f64,
    pub dropout_pos: f64,
    pub loss_weight: f64,
    pub stop_gradient: bool,
    pub tie_pos_head: bool,
    pub mode: ModelMode,
    pub lr0: f64,
    pub decay: f64,
    pub clip: f64,
    pub batch: usize,
    pub unroll: usize,
    pub max_epochs: usize,
    /// Seeds both initialization and dropout.
    pub seed: u64,
}

impl Default for RunConfig {
    fn default() -> Self {
        let m = ModelConfig::default();
        let t = TrainConfig::default();
        Self {
            data: "data".into(),
            out: "runs/train".into(),
            min_count: 1,
            hidden: m.hidden,
            layers: m.layers,
            dropout_word: m.dropout_word,
            dropout_pos: m.dropout_pos,
            loss_weight: m.loss_weight,
            stop_gradient: m.stop_gradient,
            tie_pos_head: m.tie_pos_head,
            mode: m.mode,
            lr0: t.lr0,
            decay: t.decay,
            clip: t.clip,
            batch: t.batch,
            unroll: t.unroll,
            max_epochs: t.max_epochs,
            seed: t.seed,
        }
    }
}

impl RunConfig {
    pub fn from_table(table: toml::Table) -> CliResult<Self> {
        toml::Value::Table(table)
            .try_into()
            .map_err(|e| Failure::usage(format!("config: {e}")))
    }

    pub fn model(&self) -> ModelConfig {
        ModelConfig {
            hidden: self.hidden,
            layers: self.layers,
            dropout_word: self.dropout_word,
            dropout_pos: self.dropout_pos,
            loss_weight: self.loss_weight,
            stop_gradient: self.stop_gradient,
            tie_pos_head: self.tie_pos_head,
            mode: self.mode,
            init_seed: self.seed,
        }
    }

    pub fn train(&self) -> TrainConfig {
        TrainConfig {
            lr0: self.lr0,
            decay: self.decay,
            clip: self.clip,
            batch: self.batch,
            unroll: self.unroll,
            max_epochs: self.max_epochs,
            seed: self.seed,
        }
    }
}

/// Command-line overrides; these win over the config file.
#[derive(Args, Debug, Default)]
pub struct Overrides {
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    hidden: Option<usize>,
    #[arg(long)]
    mode: Option<ModelMode>,
    #[arg(long)]
    loss_weight: Option<f64>,
    #[arg(long)]
    max_epochs: Option<usize>,
    /// Any config key, as KEY=VALUE; may be repeated.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
}

impl Overrides {
    pub fn apply(&self, table: &mut toml::Table) -> CliResult {
        if let Some(v) = self.seed {
            table.insert("seed".into(), (v as i64).into());
        }
        if let Some(v) = self.hidden {
            table.insert("hidden".into(), (v as i64).into());
        }
        if let Some(v) = self.mode {
            table.insert("mode".into(), v.as_str().into());
        }
        if let Some(v) = self.loss_weight {
            table.insert("loss_weight".into(), v.into());
        }
        if let Some(v) = self.max_epochs {
            table.insert("max_epochs".into(), (v as i64).into());
        }
        for kv in &self.set {
            let (k, v) = kv
                .split_once('=')
                .ok_or_else(|| Failure::usage(format!("--set expects KEY=VALUE, got {kv:?}")))?;
            table.insert(k.trim().to_string(), parse_value(v.trim()));
        }
        Ok(())
    }
}

/// A TOML literal if it parses as one, otherwise a bare string.
fn parse_value(s: &str) -> toml::Value {
    toml::from_str::<toml::Table>(&format!("v = {s}"))
        .ok()
        .and_then(|mut t| t.remove("v"))
        .unwrap_or_else(|| toml::Value::String(s.to_string()))
}

pub fn read_table(path: &Path) -> CliResult<toml::Table> {
    let text = fs::read_to_string(path).map_err(|e| Failure::usage(format!("{}: {e}", path.display())))?;
    toml::from_str(&text).map_err(|e| Failure::usage(format!("{}: {e}", path.display())))
}

pub fn read_toml<T: DeserializeOwned>(path: &Path) -> CliResult<T> {
    let table = read_table(path)?;
    toml::Value::Table(table)
        .try_into()
        .map_err(|e| Failure::usage(format!("{}: {e}", path.display())))
}
