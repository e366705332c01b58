//! Reproducible random streams.
//!
//! Every consumer draws from a ChaCha20 stream keyed by the run seed and
//! selected by `(purpose, client, round)`. The stream id packs those three
//! fields into disjoint bit ranges, so distinct tuples never share a stream.

use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u8)]
pub enum Purpose {
    Init = 1,
    Partition = 2,
    Split = 3,
    Selection = 4,
    Training = 5,
    Privacy = 6,
    Encryption = 7,
    Keygen = 8,
    Data = 9,
}

const CLIENT_BITS: u32 = 24;

pub fn stream(seed: u64, purpose: Purpose, client: u64, round: u64) -> ChaCha20Rng {
    assert!(client < 1 << CLIENT_BITS, "client id {client} too large");
    assert!(round <= u32::MAX as u64, "round {round} too large");
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    rng.set_stream(((purpose as u64) << 56) | (client << 32) | round);
    rng
}
