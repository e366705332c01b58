//! Run configuration, read from TOML and merged over the defaults below.
//!
//! ```toml
//! [federation]   n_clients, rounds, client_fraction, dirichlet_alpha, seed
//! [training]     local_epochs, batch_size, learning_rate, validation_fraction
//! [aggregation]  tau
//! [freezing]     ema_alpha, threshold
//! [privacy]      epsilon, delta, budget
//! [model]        conv_channels, convs_per_block, kernel_size, stride, padding,
//!                pool_window, hidden, n_qubits, n_pqc_layers, n_classes, cnn_output_dim
//! [dataset]      kind = "synthetic" | "cifar10" | "fashion_mnist", path,
//!                max_train, max_test, [dataset.synthetic]
//! [he]           ring_degree, moduli_bits, scale_bits
//! ```

use std::path::{Path, PathBuf};

use hqfl_ckks::HeParams;
use serde::{Deserialize, Serialize};

use crate::data::SyntheticSpec;
use crate::error::{Error, Result};
use crate::hybrid::ModelConfig;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FederationSection {
    pub n_clients: usize,
    pub rounds: u32,
    pub client_fraction: f64,
    pub dirichlet_alpha: f64,
    pub seed: u64,
}

impl Default for FederationSection {
    fn default() -> Self {
        Self {
            n_clients: 10,
            rounds: 20,
            client_fraction: 1.0,
            dirichlet_alpha: 0.1,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrainingSection {
    pub local_epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    /// Share of each client's samples held out for validation.
    pub validation_fraction: f64,
}

impl Default for TrainingSection {
    fn default() -> Self {
        Self {
            local_epochs: 10,
            batch_size: 32,
            learning_rate: 1e-3,
            validation_fraction: 0.1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AggregationSection {
    pub tau: f64,
}

impl Default for AggregationSection {
    fn default() -> Self {
        Self { tau: 0.5 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FreezingSection {
    pub ema_alpha: f64,
    pub threshold: f64,
}

impl Default for FreezingSection {
    fn default() -> Self {
        Self {
            ema_alpha: 0.9,
            threshold: 0.001,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PrivacySection {
    pub epsilon: f64,
    pub delta: f64,
    /// Cumulative ε above which a warning is logged. The run continues.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub budget: Option<f64>,
}

impl Default for PrivacySection {
    fn default() -> Self {
        Self {
            epsilon: 1.0,
            delta: 1e-5,
            budget: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DatasetKind {
    Synthetic,
    Cifar10,
    FashionMnist,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DatasetSection {
    pub kind: DatasetKind,
    /// Directory holding the dataset files (not used for synthetic data).
    #[serde(skip_serializing_if = "Option::is_none")]
    pub path: Option<PathBuf>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub max_train: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub max_test: Option<usize>,
    pub synthetic: SyntheticSpec,
}

impl Default for DatasetSection {
    fn default() -> Self {
        Self {
            kind: DatasetKind::Synthetic,
            path: None,
            max_train: None,
            max_test: None,
            synthetic: SyntheticSpec {
                channels: 3,
                height: 32,
                width: 32,
                classes: 10,
                train: 5000,
                test: 1000,
                noise: 0.5,
            },
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct HeSection {
    pub ring_degree: usize,
    pub moduli_bits: Vec<u32>,
    pub scale_bits: u32,
}

impl Default for HeSection {
    fn default() -> Self {
        HeParams::standard().into()
    }
}

impl From<HeParams> for HeSection {
    fn from(p: HeParams) -> Self {
        Self {
            ring_degree: p.ring_degree,
            moduli_bits: p.moduli_bits,
            scale_bits: p.scale_bits,
        }
    }
}

impl HeSection {
    pub fn params(&self) -> HeParams {
        HeParams {
            ring_degree: self.ring_degree,
            moduli_bits: self.moduli_bits.clone(),
            scale_bits: self.scale_bits,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FederationConfig {
    pub federation: FederationSection,
    pub training: TrainingSection,
    pub aggregation: AggregationSection,
    pub freezing: FreezingSection,
    pub privacy: PrivacySection,
    pub model: ModelConfig,
    pub dataset: DatasetSection,
    pub he: HeSection,
}

impl FederationConfig {
    /// Parses TOML text over the defaults and validates the result.
    pub fn from_toml(src: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(src).map_err(|e| Error::Config(e.to_string().trim_end().to_owned()))?;
        cfg.validate().map_err(|(section, key, msg)| {
            let at = locate(src, section, key).map(|l| format!("line {l}: ")).unwrap_or_default();
            Error::Config(format!("{at}[{section}] {key}: {msg}"))
        })?;
        Ok(cfg)
    }

    pub fn from_path(path: &Path) -> Result<Self> {
        let src = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_toml(&src).map_err(|e| match e {
            Error::Config(m) => Error::Config(format!("{}: {m}", path.display())),
            other => other,
        })
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config is always serializable")
    }

    /// Checks every constraint; on failure names the offending section and key.
    pub fn validate(&self) -> std::result::Result<(), (&'static str, &'static str, String)> {
        fn fail(section: &'static str, key: &'static str, msg: impl Into<String>) -> std::result::Result<(), (&'static str, &'static str, String)> {
            Err((section, key, msg.into()))
        }
        let f = &self.federation;
        if f.n_clients == 0 {
            return fail("federation", "n_clients", "must be at least 1");
        }
        if f.n_clients >= 1 << 24 {
            return fail("federation", "n_clients", "too many clients");
        }
        if f.rounds == 0 {
            return fail("federation", "rounds", "must be at least 1");
        }
        if !(f.client_fraction > 0.0 && f.client_fraction <= 1.0) {
            return fail("federation", "client_fraction", format!("must lie in (0, 1], got {}", f.client_fraction));
        }
        if !(f.dirichlet_alpha > 0.0 && f.dirichlet_alpha.is_finite()) {
            return fail("federation", "dirichlet_alpha", format!("must be positive, got {}", f.dirichlet_alpha));
        }
        let t = &self.training;
        if t.batch_size == 0 {
            return fail("training", "batch_size", "must be at least 1");
        }
        if !(t.learning_rate > 0.0 && t.learning_rate.is_finite()) {
            return fail("training", "learning_rate", format!("must be positive, got {}", t.learning_rate));
        }
        if !(t.validation_fraction > 0.0 && t.validation_fraction < 1.0) {
            return fail("training", "validation_fraction", format!("must lie in (0, 1), got {}", t.validation_fraction));
        }
        if !(self.aggregation.tau > 0.0 && self.aggregation.tau.is_finite()) {
            return fail("aggregation", "tau", format!("must be positive, got {}", self.aggregation.tau));
        }
        if !(0.0..=1.0).contains(&self.freezing.ema_alpha) {
            return fail("freezing", "ema_alpha", format!("must lie in [0, 1], got {}", self.freezing.ema_alpha));
        }
        if self.freezing.threshold.is_nan() || self.freezing.threshold < 0.0 {
            return fail("freezing", "threshold", format!("must be non-negative, got {}", self.freezing.threshold));
        }
        let p = &self.privacy;
        if !(p.epsilon > 0.0 && p.epsilon.is_finite()) {
            return fail("privacy", "epsilon", format!("must be positive, got {}", p.epsilon));
        }
        if !(p.delta > 0.0 && p.delta < 1.0) {
            return fail("privacy", "delta", format!("must lie in (0, 1), got {}", p.delta));
        }
        if let Some(b) = p.budget {
            if !(b > 0.0) {
                return fail("privacy", "budget", format!("must be positive, got {b}"));
            }
        }
        if let Err(e) = self.model.validate() {
            let key = if self.model.cnn_output_dim.is_some_and(|d| d != self.model.head_width()) {
                "cnn_output_dim"
            } else {
                "n_qubits"
            };
            return fail("model", key, strip(e));
        }
        let d = &self.dataset;
        match d.kind {
            DatasetKind::Synthetic => {
                if let Err(e) = d.synthetic.validate() {
                    return fail("dataset", "synthetic", strip(e));
                }
                if d.synthetic.classes != self.model.n_classes {
                    return fail(
                        "model",
                        "n_classes",
                        format!("{} classes but the synthetic dataset has {}", self.model.n_classes, d.synthetic.classes),
                    );
                }
            }
            DatasetKind::Cifar10 | DatasetKind::FashionMnist => {
                if d.path.is_none() {
                    return fail("dataset", "path", "required for file-backed datasets");
                }
                if self.model.n_classes != 10 {
                    return fail("model", "n_classes", format!("the dataset has 10 classes, got {}", self.model.n_classes));
                }
            }
        }
        if let Err(e) = self.he.params().validate() {
            return fail("he", "moduli_bits", e.to_string());
        }
        Ok(())
    }
}

fn strip(e: Error) -> String {
    match e {
        Error::Config(m) => m,
        other => other.to_string(),
    }
}

/// 1-based line of `key` inside `[section]`, if present in the source.
fn locate(src: &str, section: &str, key: &str) -> Option<usize> {
    let mut current = String::new();
    for (i, line) in src.lines().enumerate() {
        let t = line.trim();
        if t.starts_with('[') {
            current = t.trim_matches(|c| c == '[' || c == ']').trim().to_owned();
            continue;
        }
        let in_section = current == section || current.starts_with(&format!("{section}."));
        if in_section && t.split('=').next().is_some_and(|k| k.trim() == key) {
            return Some(i + 1);
        }
    }
    None
}
