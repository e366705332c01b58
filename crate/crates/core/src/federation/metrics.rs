//! Run artifacts: `metrics.csv`, `summary.toml` and `manifest.toml`.
//!
//! `metrics.csv` columns, in order:
//!
//! | column | content |
//! |---|---|
//! | `round` | 1-based round index |
//! | `test_loss`, `test_accuracy` | global model on the test set |
//! | `selected` | client ids, `;`-separated |
//! | `privatized_accuracies` | reported accuracies, `;`-separated |
//! | `weights` | aggregation weights, `;`-separated |
//! | `sample_weights` | `|D_i|/Σ|D_j|`, `;`-separated |
//! | `frozen_layers` | layers frozen during the round |
//! | `newly_frozen` | layers frozen at the end of the round |
//! | `params_per_client` | parameters one client sent |
//! | `transmitted_params` | sum over clients |
//! | `transmitted_ciphertexts` | number of classifier ciphertexts |
//! | `transmitted_bytes` | serialized update bytes |
//! | `epsilon_total` | composed privacy loss so far |
//! | `he_security` | whether the CKKS ring size is a desk-only setting |
//! | `duration_ms` | wall clock, the only non-deterministic column |

use std::fmt::Display;
use std::path::Path;

use serde::Serialize;

use super::config::FederationConfig;
use super::orchestrator::RoundMetrics;
use crate::error::{Error, Result};

pub const METRICS_FILE: &str = "metrics.csv";
pub const SUMMARY_FILE: &str = "summary.toml";
pub const MANIFEST_FILE: &str = "manifest.toml";

pub const COLUMNS: [&str; 16] = [
    "round",
    "test_loss",
    "test_accuracy",
    "selected",
    "privatized_accuracies",
    "weights",
    "sample_weights",
    "frozen_layers",
    "newly_frozen",
    "params_per_client",
    "transmitted_params",
    "transmitted_ciphertexts",
    "transmitted_bytes",
    "epsilon_total",
    "he_security",
    "duration_ms",
];

/// Everything needed to reproduce a run.
#[derive(Debug, Clone, Serialize)]
pub struct RunManifest {
    pub version: String,
    pub seed: u64,
    pub dataset_sha256: String,
    /// Seconds since the Unix epoch.
    pub started_at: u64,
    pub he_security: String,
    pub config: FederationConfig,
}

impl RunManifest {
    pub fn new(config: &FederationConfig, dataset_sha256: &str) -> Self {
        let started_at = std::time::SystemTime::now()
            .duration_since(std::time::UNIX_EPOCH)
            .map_or(0, |d| d.as_secs());
        Self {
            version: env!("CARGO_PKG_VERSION").to_owned(),
            seed: config.federation.seed,
            dataset_sha256: dataset_sha256.to_owned(),
            started_at,
            he_security: he_security(config).to_owned(),
            config: config.clone(),
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct Summary {
    pub rounds: u32,
    pub final_test_accuracy: f64,
    pub final_test_loss: f64,
    pub total_transmitted_bytes: u64,
    pub total_transmitted_params: u64,
    pub epsilon_total: f64,
    pub frozen_layers: Vec<String>,
}

impl Summary {
    pub fn from_series(series: &[RoundMetrics]) -> Option<Self> {
        let last = series.last()?;
        let mut frozen = last.frozen_layers.clone();
        frozen.extend(last.newly_frozen.iter().cloned());
        Some(Self {
            rounds: last.round,
            final_test_accuracy: last.test_accuracy,
            final_test_loss: last.test_loss,
            total_transmitted_bytes: series.iter().map(|m| m.transmitted_bytes as u64).sum(),
            total_transmitted_params: series.iter().map(|m| m.transmitted_params as u64).sum(),
            epsilon_total: last.epsilon_total,
            frozen_layers: frozen,
        })
    }
}

/// Rings below N = 8192 are desk settings for fast tests.
pub fn he_security(config: &FederationConfig) -> &'static str {
    if config.he.ring_degree >= 8192 {
        "standard"
    } else {
        "desk (NOT cryptographically secure)"
    }
}

fn join<T: Display>(xs: &[T]) -> String {
    xs.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(";")
}

fn io(path: &Path, e: impl Display) -> Error {
    Error::Io(std::io::Error::other(format!("{}: {e}", path.display())))
}

/// The metrics table as CSV text.
pub fn metrics_csv(series: &[RoundMetrics], security: &str) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let err = |e: csv::Error| Error::Io(std::io::Error::other(e));
    w.write_record(COLUMNS).map_err(err)?;
    for m in series {
        w.write_record([
            m.round.to_string(),
            m.test_loss.to_string(),
            m.test_accuracy.to_string(),
            join(&m.selected),
            join(&m.privatized_accuracies),
            join(&m.weights),
            join(&m.sample_weights),
            m.frozen_layers.join(";"),
            m.newly_frozen.join(";"),
            m.params_per_client.to_string(),
            m.transmitted_params.to_string(),
            m.transmitted_ciphertexts.to_string(),
            m.transmitted_bytes.to_string(),
            m.epsilon_total.to_string(),
            security.to_owned(),
            format!("{:.3}", m.duration_ms),
        ])
        .map_err(err)?;
    }
    let bytes = w.into_inner().map_err(|e| Error::Io(e.into_error()))?;
    Ok(String::from_utf8(bytes).expect("csv output is UTF-8"))
}

pub fn write_manifest(out_dir: &Path, manifest: &RunManifest) -> Result<()> {
    std::fs::create_dir_all(out_dir).map_err(|e| io(out_dir, e))?;
    let path = out_dir.join(MANIFEST_FILE);
    let text = toml::to_string(manifest).map_err(|e| io(&path, e))?;
    std::fs::write(&path, text).map_err(|e| io(&path, e))
}

/// Writes `metrics.csv` and `summary.toml` into `out_dir`.
pub fn emit_metrics(series: &[RoundMetrics], config: &FederationConfig, out_dir: &Path) -> Result<()> {
    let summary = Summary::from_series(series).ok_or_else(|| Error::Input("no rounds to report".into()))?;
    std::fs::create_dir_all(out_dir).map_err(|e| io(out_dir, e))?;
    let path = out_dir.join(METRICS_FILE);
    std::fs::write(&path, metrics_csv(series, he_security(config))?).map_err(|e| io(&path, e))?;
    let path = out_dir.join(SUMMARY_FILE);
    let text = toml::to_string(&summary).map_err(|e| io(&path, e))?;
    std::fs::write(&path, text).map_err(|e| io(&path, e))
}
