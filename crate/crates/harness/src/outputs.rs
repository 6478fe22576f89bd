//! Deterministic artifact writers. Every file leads with the
//! `(experiment, seed, config_hash)` triple; `summary.json` and
//! `results.csv` are byte-identical across reruns of the same triple.

use anyhow::Result;
use serde::Serialize;
use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use crate::config::ExperimentConfig;

#[derive(Debug, Clone, Serialize)]
pub struct RunReport {
    pub experiment: String,
    pub seed: u64,
    pub config_hash: String,
    pub metrics: BTreeMap<String, f64>,
    pub passed: bool,
    pub failures: Vec<String>,
    /// Wall-clock seconds; reported to the console and `timing.json`,
    /// never to the deterministic artifacts.
    #[serde(skip)]
    pub wall_secs: f64,
}

impl RunReport {
    pub fn metric(&self, key: &str) -> Option<f64> {
        self.metrics.get(key).copied()
    }
}

/// Collects metrics and embedded assertions for one run.
pub struct Recorder {
    cfg: ExperimentConfig,
    hash: String,
    started: std::time::Instant,
    metrics: BTreeMap<String, f64>,
    failures: Vec<String>,
}

impl Recorder {
    pub fn new(cfg: &ExperimentConfig) -> Result<Self> {
        std::fs::create_dir_all(&cfg.out_dir)?;
        Ok(Self {
            hash: cfg.content_hash(),
            cfg: cfg.clone(),
            started: std::time::Instant::now(),
            metrics: BTreeMap::new(),
            failures: Vec::new(),
        })
    }

    pub fn cfg(&self) -> &ExperimentConfig {
        &self.cfg
    }

    pub fn out_path(&self, name: &str) -> PathBuf {
        self.cfg.out_dir.join(name)
    }

    pub fn metric(&mut self, key: &str, value: f64) {
        self.metrics.insert(key.to_string(), value);
    }

    /// Embedded assertion: a failed check marks the run failed (exit code
    /// nonzero) without aborting it.
    pub fn check(&mut self, ok: bool, label: &str) {
        if !ok {
            self.failures.push(label.to_string());
        }
    }

    fn header_comment(&self) -> String {
        format!(
            "# experiment={} seed={} config_hash={}\n",
            self.cfg.experiment, self.cfg.seed, self.hash
        )
    }

    /// `results.csv` (or any named CSV): header comment, column row, data.
    pub fn write_csv(&self, name: &str, columns: &[&str], rows: &[Vec<String>]) -> Result<()> {
        let mut text = self.header_comment();
        text.push_str(&columns.join(","));
        text.push('\n');
        for row in rows {
            text.push_str(&row.join(","));
            text.push('\n');
        }
        std::fs::write(self.out_path(name), text)?;
        Ok(())
    }

    pub fn write_text(&self, name: &str, body: &str) -> Result<()> {
        let mut text = self.header_comment();
        text.push_str(body);
        std::fs::write(self.out_path(name), text)?;
        Ok(())
    }

    pub fn write_svg(&self, name: &str, svg_body: &str) -> Result<()> {
        let annotated = svg_body.replacen(
            "<svg ",
            &format!(
                "<!-- experiment={} seed={} config_hash={} -->\n<svg ",
                self.cfg.experiment, self.cfg.seed, self.hash
            ),
            1,
        );
        std::fs::write(self.out_path(name), annotated)?;
        Ok(())
    }

    pub fn write_json(&self, name: &str, value: &serde_json::Value) -> Result<()> {
        std::fs::write(self.out_path(name), serde_json::to_string_pretty(value)?)?;
        Ok(())
    }

    /// Non-deterministic timing sidecar, kept out of summary.json.
    pub fn write_timing(&self, extra: &[(&str, f64)]) -> Result<()> {
        let mut map = serde_json::Map::new();
        map.insert(
            "wall_secs".into(),
            serde_json::json!(self.started.elapsed().as_secs_f64()),
        );
        for (k, v) in extra {
            map.insert((*k).into(), serde_json::json!(v));
        }
        map.insert(
            "note".into(),
            serde_json::json!("timings are machine-dependent; excluded from determinism checks"),
        );
        std::fs::write(
            self.out_path("timing.json"),
            serde_json::to_string_pretty(&serde_json::Value::Object(map))?,
        )?;
        Ok(())
    }

    /// Write `summary.json` and finish.
    pub fn finish(self) -> Result<RunReport> {
        let report = RunReport {
            experiment: self.cfg.experiment.clone(),
            seed: self.cfg.seed,
            config_hash: self.hash.clone(),
            metrics: self.metrics,
            passed: self.failures.is_empty(),
            failures: self.failures,
            wall_secs: self.started.elapsed().as_secs_f64(),
        };
        let mut value = serde_json::to_value(&report)?;
        // Echo the full config for provenance.
        let obj = value.as_object_mut().expect("report serializes to object");
        obj.insert(
            "config".into(),
            serde_json::json!({
                "experiment": self.cfg.experiment,
                "seed": self.cfg.seed,
                "overrides": self.cfg.overrides,
            }),
        );
        std::fs::write(
            self.cfg.out_dir.join("summary.json"),
            serde_json::to_string_pretty(&value)?,
        )?;
        Ok(report)
    }
}

/// Mean and standard deviation per metric over per-seed reports.
pub fn aggregate_reports(name: &str, reports: &[RunReport]) -> Result<serde_json::Value> {
    let mut keys: Vec<String> = Vec::new();
    for r in reports {
        for k in r.metrics.keys() {
            if !keys.contains(k) {
                keys.push(k.clone());
            }
        }
    }
    keys.sort();
    let mut metrics = serde_json::Map::new();
    for k in keys {
        let vals: Vec<f64> = reports.iter().filter_map(|r| r.metric(&k)).collect();
        if vals.is_empty() {
            continue;
        }
        let n = vals.len() as f64;
        let mean = vals.iter().sum::<f64>() / n;
        let var = vals.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>()
            / (vals.len().saturating_sub(1)).max(1) as f64;
        metrics.insert(
            k,
            serde_json::json!({"mean": mean, "std": var.sqrt(), "n": vals.len()}),
        );
    }
    Ok(serde_json::json!({
        "experiment": name,
        "seeds": reports.iter().map(|r| r.seed).collect::<Vec<_>>(),
        "all_passed": reports.iter().all(|r| r.passed),
        "metrics": metrics,
    }))
}

/// Format a float with full round-trip precision for CSV cells.
pub fn fmt(v: f64) -> String {
    format!("{v}")
}

pub fn read_to_string(path: &Path) -> Result<String> {
    Ok(std::fs::read_to_string(path)?)
}
