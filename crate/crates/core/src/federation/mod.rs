//! Simulated federation: partitioning, client rounds, the server loop and
//! run artifacts.

pub mod client;
pub mod config;
pub mod metrics;
pub mod orchestrator;
pub mod partition;

pub use client::{accuracy, local_train, ClientData, LocalResult};
pub use config::FederationConfig;
pub use metrics::{emit_metrics, write_manifest, RunManifest, Summary};
pub use orchestrator::{evaluate_global, load_dataset, run_federation, Federation, RoundMetrics};
pub use partition::{class_entropy, dirichlet, dirichlet_partition, histogram};
