//! Dense state-vector register. Qubit 0 is the most significant bit of the
//! basis-state index.

use num_complex::Complex64;

use crate::error::{config_err, input_err, Result};

pub const MAX_QUBITS: usize = 8;
pub const EMBED_NORM_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Axis {
    Y,
    Z,
}

#[derive(Debug, Clone, PartialEq)]
pub struct QuantumState {
    amplitudes: Vec<Complex64>,
    n_qubits: usize,
}

impl QuantumState {
    /// `|0…0⟩` on `n` qubits.
    pub fn zero(n_qubits: usize) -> Result<Self> {
        check_qubits(n_qubits)?;
        let mut amplitudes = vec![Complex64::new(0.0, 0.0); 1 << n_qubits];
        amplitudes[0] = Complex64::new(1.0, 0.0);
        Ok(Self { amplitudes, n_qubits })
    }

    /// Wraps raw amplitudes; the length must be `2^n` and the norm 1.
    pub fn from_amplitudes(amplitudes: Vec<Complex64>) -> Result<Self> {
        let n_qubits = qubits_for_len(amplitudes.len())?;
        let norm2: f64 = amplitudes.iter().map(|a| a.norm_sqr()).sum();
        if (norm2.sqrt() - 1.0).abs() > EMBED_NORM_TOLERANCE {
            return Err(input_err!("state norm {} is not 1", norm2.sqrt()));
        }
        Ok(Self { amplitudes, n_qubits })
    }

    pub fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    pub fn amplitudes(&self) -> &[Complex64] {
        &self.amplitudes
    }

    pub fn norm(&self) -> f64 {
        self.amplitudes.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt()
    }

    fn mask(&self, qubit: usize) -> usize {
        1 << (self.n_qubits - 1 - qubit)
    }

    fn check_qubit(&self, qubit: usize) -> Result<()> {
        if qubit >= self.n_qubits {
            return Err(input_err!("qubit {qubit} out of range for {} qubits", self.n_qubits));
        }
        Ok(())
    }

    /// Apply a 2×2 unitary `[[a, b], [c, d]]` to `qubit`.
    pub fn apply_single(&mut self, qubit: usize, m: [[Complex64; 2]; 2]) -> Result<()> {
        self.check_qubit(qubit)?;
        let mask = self.mask(qubit);
        for i in 0..self.amplitudes.len() {
            if i & mask == 0 {
                let a0 = self.amplitudes[i];
                let a1 = self.amplitudes[i | mask];
                self.amplitudes[i] = m[0][0] * a0 + m[0][1] * a1;
                self.amplitudes[i | mask] = m[1][0] * a0 + m[1][1] * a1;
            }
        }
        Ok(())
    }

    pub fn apply_rotation(&mut self, qubit: usize, axis: Axis, angle: f64) -> Result<()> {
        self.apply_single(qubit, rotation_matrix(axis, angle))
    }

    pub fn apply_cnot(&mut self, control: usize, target: usize) -> Result<()> {
        self.check_qubit(control)?;
        self.check_qubit(target)?;
        if control == target {
            return Err(input_err!("CNOT control and target are both qubit {control}"));
        }
        let (cm, tm) = (self.mask(control), self.mask(target));
        for i in 0..self.amplitudes.len() {
            if i & cm != 0 && i & tm == 0 {
                self.amplitudes.swap(i, i | tm);
            }
        }
        Ok(())
    }

    /// `⟨Z_i⟩` for every qubit.
    pub fn pauli_z_expectations(&self) -> Vec<f64> {
        let mut out = vec![0.0; self.n_qubits];
        for (idx, a) in self.amplitudes.iter().enumerate() {
            let p = a.norm_sqr();
            for (q, o) in out.iter_mut().enumerate() {
                if idx & self.mask(q) == 0 {
                    *o += p;
                } else {
                    *o -= p;
                }
            }
        }
        out
    }
}

/// `R_y(θ) = [[cos θ/2, −sin θ/2], [sin θ/2, cos θ/2]]`,
/// `R_z(φ) = diag(e^{−iφ/2}, e^{iφ/2})`.
pub fn rotation_matrix(axis: Axis, angle: f64) -> [[Complex64; 2]; 2] {
    let half = angle / 2.0;
    let zero = Complex64::new(0.0, 0.0);
    match axis {
        Axis::Y => {
            let (s, c) = half.sin_cos();
            [
                [Complex64::new(c, 0.0), Complex64::new(-s, 0.0)],
                [Complex64::new(s, 0.0), Complex64::new(c, 0.0)],
            ]
        }
        Axis::Z => [
            [Complex64::from_polar(1.0, -half), zero],
            [zero, Complex64::from_polar(1.0, half)],
        ],
    }
}

fn check_qubits(n: usize) -> Result<()> {
    if n == 0 || n > MAX_QUBITS {
        return Err(config_err!("qubit count must be in 1..={MAX_QUBITS}, got {n}"));
    }
    Ok(())
}

fn qubits_for_len(len: usize) -> Result<usize> {
    if !len.is_power_of_two() || len < 2 {
        return Err(config_err!("state length {len} is not 2^n for n ≥ 1"));
    }
    let n = len.trailing_zeros() as usize;
    check_qubits(n)?;
    Ok(n)
}

/// Load a unit-norm real vector as amplitudes.
pub fn amplitude_embed(x: &[f64]) -> Result<QuantumState> {
    qubits_for_len(x.len())?;
    let norm = x.iter().map(|v| v * v).sum::<f64>().sqrt();
    if (norm - 1.0).abs() > EMBED_NORM_TOLERANCE {
        return Err(input_err!("embedding input has norm {norm}, expected 1"));
    }
    QuantumState::from_amplitudes(x.iter().map(|&v| Complex64::new(v, 0.0)).collect())
}
