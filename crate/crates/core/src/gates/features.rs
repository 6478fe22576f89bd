//! Feature maps over controller parameters and the labeled datasets the
//! classifier gates train on.

use serde::{Deserialize, Serialize};

use crate::linalg::{norm2, spectral_radius, stats};
use crate::oracle::Oracle;
use crate::params::{gaussian_mutation, ParamVector};
use crate::rng::RngStream;
use crate::{Error, Result};

/// Names of the 13 handcrafted features, in extraction order.
pub const FEATURE13_NAMES: [&str; 13] = [
    "frob_w_in",
    "frob_w_rec",
    "frob_w_out",
    "spectral_radius_w_rec",
    "tau_mean",
    "tau_std",
    "tau_min",
    "tau_max",
    "bias_norm",
    "all_mean",
    "all_std",
    "all_min",
    "all_max",
];

/// The handcrafted 13-dimensional feature vector: Frobenius norms of the
/// three weight matrices, the spectral radius of `W_rec`, time-constant
/// statistics, the bias norm, and whole-vector statistics.
pub fn extract_features13(theta: &ParamVector) -> [f64; 13] {
    let groups = theta.unpack();
    let rho = spectral_radius(&groups.w_rec, 300, 1e-10);
    let (tau_mean, tau_std, tau_min, tau_max) = stats(&groups.tau);
    let (all_mean, all_std, all_min, all_max) = stats(&theta.values);
    [
        groups.w_in.frobenius(),
        groups.w_rec.frobenius(),
        groups.w_out.frobenius(),
        rho,
        tau_mean,
        tau_std,
        tau_min,
        tau_max,
        norm2(&groups.bias),
        all_mean,
        all_std,
        all_min,
        all_max,
    ]
}

/// The three feature representations the classifier grid runs on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FeatureKind {
    Handcrafted13,
    RawParams,
    Combined,
}

impl FeatureKind {
    pub const ALL: [FeatureKind; 3] = [
        FeatureKind::Handcrafted13,
        FeatureKind::RawParams,
        FeatureKind::Combined,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            FeatureKind::Handcrafted13 => "handcrafted13",
            FeatureKind::RawParams => "raw_d",
            FeatureKind::Combined => "combined",
        }
    }

    pub fn dimension(&self, d: usize) -> usize {
        match self {
            FeatureKind::Handcrafted13 => 13,
            FeatureKind::RawParams => d,
            FeatureKind::Combined => 13 + d,
        }
    }

    pub fn extract(&self, theta: &ParamVector) -> Vec<f64> {
        match self {
            FeatureKind::Handcrafted13 => extract_features13(theta).to_vec(),
            FeatureKind::RawParams => theta.values.clone(),
            FeatureKind::Combined => {
                let mut out = extract_features13(theta).to_vec();
                out.extend_from_slice(&theta.values);
                out
            }
        }
    }

    pub fn column_names(&self, d: usize) -> Vec<String> {
        let raw = |out: &mut Vec<String>| {
            for i in 0..d {
                out.push(format!("theta_{i}"));
            }
        };
        let mut out = Vec::new();
        match self {
            FeatureKind::Handcrafted13 => out.extend(FEATURE13_NAMES.iter().map(|s| s.to_string())),
            FeatureKind::RawParams => raw(&mut out),
            FeatureKind::Combined => {
                out.extend(FEATURE13_NAMES.iter().map(|s| s.to_string()));
                raw(&mut out);
            }
        }
        out
    }
}

/// Feature rows with safe/unsafe labels.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledDataset {
    pub features: Vec<Vec<f64>>,
    pub labels: Vec<bool>,
    pub feature_map: FeatureKind,
}

impl LabeledDataset {
    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn width(&self) -> usize {
        self.features.first().map(|f| f.len()).unwrap_or(0)
    }

    pub fn has_both_classes(&self) -> bool {
        self.labels.iter().any(|&l| l) && self.labels.iter().any(|&l| !l)
    }

    pub fn class_counts(&self) -> (usize, usize) {
        let safe = self.labels.iter().filter(|&&l| l).count();
        (safe, self.labels.len() - safe)
    }

    /// CSV with a header row of feature names plus a final `label` column.
    pub fn to_csv(&self, names: &[String]) -> String {
        let mut out = String::new();
        let header: Vec<String> = if names.len() == self.width() {
            names.to_vec()
        } else {
            (0..self.width()).map(|i| format!("f{i}")).collect()
        };
        out.push_str(&header.join(","));
        out.push_str(",label\n");
        for (row, &label) in self.features.iter().zip(&self.labels) {
            for v in row {
                out.push_str(&format!("{v},"));
            }
            out.push_str(if label { "safe" } else { "unsafe" });
            out.push('\n');
        }
        out
    }

    pub fn from_csv(text: &str, feature_map: FeatureKind) -> Result<Self> {
        let mut features = Vec::new();
        let mut labels = Vec::new();
        for (i, line) in text.lines().enumerate() {
            if i == 0 || line.trim().is_empty() {
                continue;
            }
            let mut fields: Vec<&str> = line.split(',').collect();
            let label = match fields.pop() {
                Some("safe") => true,
                Some("unsafe") => false,
                other => return Err(Error::Parse(format!("line {}: bad label {other:?}", i + 1))),
            };
            let row: std::result::Result<Vec<f64>, _> =
                fields.iter().map(|f| f.parse::<f64>()).collect();
            features.push(row.map_err(|e| Error::Parse(format!("line {}: {e}", i + 1)))?);
            labels.push(label);
        }
        Ok(Self {
            features,
            labels,
            feature_map,
        })
    }
}

/// Generate `n` oracle-labeled samples by mutating a mixture of a safe
/// anchor and an unsafe anchor at scales 0.01 and 0.05.
///
/// The unsafe anchor is found by mutating the safe one until the oracle
/// flags a violation (escalating the scale if needed).
pub fn generate_labeled_dataset(
    oracle: &Oracle,
    safe_anchor: &ParamVector,
    n: usize,
    feature_map: FeatureKind,
    rng: &RngStream,
) -> Result<LabeledDataset> {
    if n == 0 {
        return Err(Error::InvalidArgument("dataset size must be >= 1".into()));
    }
    let unsafe_anchor = find_unsafe_anchor(oracle, safe_anchor, rng)?;

    let mut features = Vec::with_capacity(n);
    let mut labels = Vec::with_capacity(n);
    for i in 0..n {
        let mut child = rng.child_indexed("dataset-sample", i as u64);
        let anchor = if i % 2 == 0 {
            safe_anchor
        } else {
            &unsafe_anchor
        };
        let sigma = if (i / 2) % 2 == 0 { 0.01 } else { 0.05 };
        let theta = gaussian_mutation(anchor, sigma, &mut child);
        let verdict = oracle.evaluate(&theta)?;
        features.push(feature_map.extract(&theta));
        labels.push(verdict.safe);
    }
    Ok(LabeledDataset {
        features,
        labels,
        feature_map,
    })
}

fn find_unsafe_anchor(
    oracle: &Oracle,
    safe_anchor: &ParamVector,
    rng: &RngStream,
) -> Result<ParamVector> {
    for (round, sigma) in [0.05, 0.1, 0.2, 0.5].iter().enumerate() {
        for i in 0..200u64 {
            let mut child = rng.child_indexed(&format!("unsafe-anchor-{round}"), i);
            let theta = gaussian_mutation(safe_anchor, *sigma, &mut child);
            if !oracle.evaluate(&theta)?.safe {
                return Ok(theta);
            }
        }
    }
    Err(Error::Generation(
        "no unsafe anchor found near the safe controller".into(),
    ))
}
