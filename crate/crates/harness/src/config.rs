//! Run configuration: experiment name, seed, output directory, and a flat
//! key=value override map. The override format is diff-able text, read
//! from a config file or `--set key=value` flags.

use anyhow::{bail, Context, Result};
use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use safegate_core::rng::fnv1a64;

#[derive(Debug, Clone)]
pub struct ExperimentConfig {
    pub experiment: String,
    pub seed: u64,
    pub out_dir: PathBuf,
    pub overrides: BTreeMap<String, String>,
}

impl ExperimentConfig {
    pub fn new(experiment: impl Into<String>, seed: u64, out_dir: impl Into<PathBuf>) -> Self {
        Self {
            experiment: experiment.into(),
            seed,
            out_dir: out_dir.into(),
            overrides: BTreeMap::new(),
        }
    }

    pub fn set(mut self, key: &str, value: impl ToString) -> Self {
        self.overrides.insert(key.into(), value.to_string());
        self
    }

    /// Merge `key=value` lines from a config file (later CLI flags win).
    pub fn load_overrides(&mut self, path: &Path) -> Result<()> {
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("reading config file {}", path.display()))?;
        for (lineno, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let Some((k, v)) = line.split_once('=') else {
                bail!("config line {} is not key=value: {line:?}", lineno + 1);
            };
            self.overrides
                .entry(k.trim().to_string())
                .or_insert_with(|| v.trim().to_string());
        }
        Ok(())
    }

    pub fn parse_set_flag(&mut self, flag: &str) -> Result<()> {
        let Some((k, v)) = flag.split_once('=') else {
            bail!("--set expects key=value, got {flag:?}");
        };
        self.overrides.insert(k.trim().into(), v.trim().into());
        Ok(())
    }

    /// Content hash over the identifying triple, embedded in every output.
    pub fn content_hash(&self) -> String {
        let mut canon = format!("experiment={}\nseed={}\n", self.experiment, self.seed);
        for (k, v) in &self.overrides {
            canon.push_str(&format!("{k}={v}\n"));
        }
        format!("{:016x}", fnv1a64(canon.as_bytes()))
    }

    pub fn usize_param(&self, key: &str, default: usize) -> Result<usize> {
        match self.overrides.get(key) {
            None => Ok(default),
            Some(v) => v
                .parse()
                .with_context(|| format!("override {key}={v} is not an integer")),
        }
    }

    pub fn u64_param(&self, key: &str, default: u64) -> Result<u64> {
        match self.overrides.get(key) {
            None => Ok(default),
            Some(v) => v
                .parse()
                .with_context(|| format!("override {key}={v} is not an integer")),
        }
    }

    pub fn f64_param(&self, key: &str, default: f64) -> Result<f64> {
        match self.overrides.get(key) {
            None => Ok(default),
            Some(v) => v
                .parse()
                .with_context(|| format!("override {key}={v} is not a number")),
        }
    }

    /// Comma-separated integer list override.
    pub fn usize_list_param(&self, key: &str, default: &[usize]) -> Result<Vec<usize>> {
        match self.overrides.get(key) {
            None => Ok(default.to_vec()),
            Some(v) => v
                .split(',')
                .map(|p| {
                    p.trim()
                        .parse()
                        .with_context(|| format!("override {key}: bad entry {p:?}"))
                })
                .collect(),
        }
    }

    pub fn f64_list_param(&self, key: &str, default: &[f64]) -> Result<Vec<f64>> {
        match self.overrides.get(key) {
            None => Ok(default.to_vec()),
            Some(v) => v
                .split(',')
                .map(|p| {
                    p.trim()
                        .parse()
                        .with_context(|| format!("override {key}: bad entry {p:?}"))
                })
                .collect(),
        }
    }
}
