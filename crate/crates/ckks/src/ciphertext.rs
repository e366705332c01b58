use num_bigint::BigInt;
use num_traits::Zero;

/// Encoded message polynomial with its scale and level.
#[derive(Debug, Clone, PartialEq)]
pub struct Plaintext {
    pub(crate) coeffs: Vec<BigInt>,
    pub(crate) scale: f64,
    pub(crate) level: usize,
}

impl Plaintext {
    pub fn scale(&self) -> f64 {
        self.scale
    }

    pub fn level(&self) -> usize {
        self.level
    }

    pub fn coefficients(&self) -> &[BigInt] {
        &self.coeffs
    }

    /// True when only the constant coefficient may be non-zero.
    pub fn is_constant(&self) -> bool {
        self.coeffs[1..].iter().all(Zero::is_zero)
    }
}

/// Ciphertext `(c0, c1)` decrypting as `c0 + c1·s ≈ Δ·m (mod Q_level)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Ciphertext {
    pub(crate) c0: Vec<BigInt>,
    pub(crate) c1: Vec<BigInt>,
    pub(crate) scale: f64,
    pub(crate) level: usize,
}

impl Ciphertext {
    pub fn scale(&self) -> f64 {
        self.scale
    }

    /// Number of data primes still in the modulus.
    pub fn level(&self) -> usize {
        self.level
    }

    pub fn ring_degree(&self) -> usize {
        self.c0.len()
    }
}
