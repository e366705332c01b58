use std::fmt;

use num_bigint::BigInt;

/// RLWE public key `(b, a)` with `b = -a·s + e` under the top-level data modulus.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PublicKey {
    pub(crate) b: Vec<BigInt>,
    pub(crate) a: Vec<BigInt>,
}

/// Ternary secret polynomial. Deliberately has no serialization path.
#[derive(Clone, PartialEq, Eq)]
pub struct SecretKey {
    pub(crate) s: Vec<i8>,
}

impl SecretKey {
    pub fn hamming_weight(&self) -> usize {
        self.s.iter().filter(|&&c| c != 0).count()
    }

    /// Raw coefficients, for leak audits in tests only.
    #[doc(hidden)]
    pub fn coefficients(&self) -> &[i8] {
        &self.s
    }
}

impl fmt::Debug for SecretKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("SecretKey")
            .field("degree", &self.s.len())
            .finish_non_exhaustive()
    }
}

#[derive(Debug, Clone)]
pub struct KeyPair {
    pub public: PublicKey,
    pub secret: SecretKey,
}
