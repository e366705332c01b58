use crate::HeError;

/// Ring and modulus-chain configuration.
///
/// The last entry of `moduli_bits` is the special prime reserved for key
/// switching. No key switching is performed here, so ciphertexts live under
/// the product of the remaining (data) primes.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct HeParams {
    pub ring_degree: usize,
    pub moduli_bits: Vec<u32>,
    pub scale_bits: u32,
}

impl HeParams {
    /// N = 8192, chain [60, 40, 40, 60], scale 2^40.
    pub fn standard() -> Self {
        Self {
            ring_degree: 8192,
            moduli_bits: vec![60, 40, 40, 60],
            scale_bits: 40,
        }
    }

    /// Reduced parameters for fast tests: N = 4096, chain [50, 40, 40, 50].
    ///
    /// NOT cryptographically secure: the data modulus exceeds the 128-bit
    /// security bound for this ring degree.
    pub fn desk() -> Self {
        Self {
            ring_degree: 4096,
            moduli_bits: vec![50, 40, 40, 50],
            scale_bits: 40,
        }
    }

    pub fn scale(&self) -> f64 {
        2f64.powi(self.scale_bits as i32)
    }

    pub fn slot_count(&self) -> usize {
        self.ring_degree / 2
    }

    /// Number of data primes, i.e. the level of a fresh ciphertext.
    pub fn max_level(&self) -> usize {
        self.moduli_bits.len().saturating_sub(1)
    }

    /// Whether the parameters meet the usual 128-bit security table
    /// (total modulus bits per ring degree).
    pub fn is_128_bit_secure(&self) -> bool {
        let budget = match self.ring_degree {
            1024 => 27,
            2048 => 54,
            4096 => 109,
            8192 => 218,
            16384 => 438,
            32768 => 881,
            _ => 0,
        };
        self.moduli_bits.iter().sum::<u32>() <= budget
    }

    pub fn validate(&self) -> Result<(), HeError> {
        let n = self.ring_degree;
        if !n.is_power_of_two() || !(8..=1 << 16).contains(&n) {
            return Err(HeError::Config(format!(
                "ring degree {n} must be a power of two in [8, 65536]"
            )));
        }
        if self.moduli_bits.len() < 2 {
            return Err(HeError::Config(format!(
                "modulus chain needs at least 2 primes, got {}",
                self.moduli_bits.len()
            )));
        }
        if let Some(&b) = self.moduli_bits.iter().find(|&&b| !(20..=62).contains(&b)) {
            return Err(HeError::Config(format!(
                "prime size {b} bits outside supported range [20, 62]"
            )));
        }
        let data = &self.moduli_bits[..self.max_level()];
        let smallest = *data.iter().min().expect("chain length checked");
        if self.scale_bits == 0 || self.scale_bits > smallest {
            return Err(HeError::Config(format!(
                "scale 2^{} must not exceed the smallest data prime ({} bits)",
                self.scale_bits, smallest
            )));
        }
        if data[0] <= self.scale_bits {
            return Err(HeError::Config(format!(
                "base prime ({} bits) leaves no headroom above the scale 2^{}",
                data[0], self.scale_bits
            )));
        }
        Ok(())
    }
}
