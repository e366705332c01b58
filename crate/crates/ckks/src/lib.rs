//! Textbook CKKS over `Z[X]/(X^N + 1)` with arbitrary-precision coefficients.
//!
//! Supports exactly what encrypted weighted model aggregation needs: key
//! generation, real-vector encoding, public-key encryption, decryption,
//! ciphertext addition, plaintext multiplication and rescaling. There are no
//! relinearization or Galois keys, and no ciphertext-ciphertext products.
//!
//! [`HeParams::desk`] is a reduced parameter set for tests and is NOT
//! cryptographically secure. [`HeParams::standard`] (N = 8192, chain
//! [60, 40, 40, 60], scale 2^40) targets roughly 128-bit security.

mod arith;
mod ciphertext;
mod context;
mod encoding;
mod keys;
mod ntt;
mod params;
mod poly;
pub mod wire;

pub use ciphertext::{Ciphertext, Plaintext};
pub use context::{CkksContext, NOISE_STDDEV};
pub use keys::{KeyPair, PublicKey, SecretKey};
pub use params::HeParams;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum HeError {
    #[error("HE configuration error: {0}")]
    Config(String),
    #[error("HE input error: {0}")]
    Input(String),
    #[error("HE protocol error: {0}")]
    Protocol(String),
    #[error("malformed ciphertext: {0}")]
    Wire(String),
}
