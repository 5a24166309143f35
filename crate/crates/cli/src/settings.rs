//! Optional TOML configuration. Command-line flags override these values,
//! which override the built-in defaults.

use std::path::{Path, PathBuf};

use anyhow::Context;
use serde::Deserialize;

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields, rename_all = "kebab-case")]
pub struct Settings {
    pub metadata: Option<PathBuf>,
    pub features: Option<PathBuf>,
    pub splits: Option<PathBuf>,
    pub vocab: Option<PathBuf>,
    pub checkpoint: Option<PathBuf>,
    pub out: Option<PathBuf>,
    pub vocab_cap: Option<usize>,
    pub min_count: Option<usize>,
    pub model: Option<String>,
    pub arch: Option<String>,
    pub attribute: Option<String>,
    pub dim: Option<usize>,
    pub margin: Option<f64>,
    pub alpha: Option<f64>,
    pub lr: Option<f64>,
    pub batch: Option<usize>,
    pub epochs: Option<usize>,
    pub patience: Option<usize>,
    pub ridge: Option<f64>,
    pub seed: Option<u64>,
    pub pool: Option<String>,
}

impl Settings {
    pub fn load(path: &Path) -> anyhow::Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("{}", path.display()))?;
        toml::from_str(&text).with_context(|| format!("invalid config file {}", path.display()))
    }
}

/// First of `flag`, `config`, then `default`.
pub fn pick<T>(flag: Option<T>, config: &Option<T>, default: T) -> T
where
    T: Clone,
{
    flag.or_else(|| config.clone()).unwrap_or(default)
}

pub fn pick_opt<T: Clone>(flag: Option<T>, config: &Option<T>) -> Option<T> {
    flag.or_else(|| config.clone())
}
