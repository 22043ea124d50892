//! Optional TOML config file. Every value a flag can set can live here
//! instead; flags always win when both are present.

use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use serde::Deserialize;

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub data: Option<PathBuf>,
    pub format: Option<String>,
    pub model: Option<PathBuf>,
    pub test_fraction: Option<f64>,
    pub split_seed: Option<u64>,
    pub d: Option<usize>,
    pub lambda: Option<f64>,
    pub train_iters: Option<usize>,
    pub tolerance: Option<f64>,
    pub seed: Option<u64>,
    pub k: Option<usize>,
    pub metric: Option<String>,
    pub alpha: Option<f64>,
    pub alphas: Option<Vec<f64>>,
    pub discount: Option<f64>,
    pub max_iters: Option<usize>,
    pub include_observed: Option<bool>,
    pub out_dir: Option<PathBuf>,
}

impl RunConfig {
    /// Parse the file at `path`, or return the all-empty config when no file
    /// was given.
    pub fn load(path: Option<&Path>) -> Result<Self> {
        let Some(path) = path else {
            return Ok(RunConfig::default());
        };
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("cannot read config file {}", path.display()))?;
        toml::from_str(&text)
            .with_context(|| format!("cannot parse config file {}", path.display()))
    }
}
