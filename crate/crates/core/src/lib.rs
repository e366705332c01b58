//! Federated training of hybrid CNN + parameterized-quantum-circuit classifiers.
//!
//! Clients train locally with Adam, report Laplace-privatized validation
//! accuracies, and send their final classifier layer under CKKS encryption.
//! The server aggregates with tempered-softmax weights and freezes classical
//! layers whose smoothed round-over-round change falls below a threshold.

pub mod aggregation;
pub mod data;
pub mod dp;
pub mod error;
pub mod federation;
pub mod gradcheck;
pub mod hybrid;
pub mod nn;
pub mod quantum;
pub mod rng;
pub mod tensor;
pub mod update;

pub use error::{Error, Result};
pub use tensor::Tensor;
