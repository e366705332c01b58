use std::f64::consts::FRAC_PI_2;

use num_complex::Complex64;

use super::circuit::{inverse_entangling_layers, strongly_entangling_layers, CnotSchedule, EntanglingLayerParams};
use super::state::{amplitude_embed, QuantumState};
use crate::error::Result;
use crate::tensor::Tensor;

/// `⟨Z⟩` after embedding `x` and running the circuit.
pub fn expectations(x: &[f64], params: &EntanglingLayerParams, schedule: &CnotSchedule) -> Result<Vec<f64>> {
    let state = amplitude_embed(x)?;
    Ok(strongly_entangling_layers(&state, params, schedule)?.pauli_z_expectations())
}

/// `∂⟨Z_i⟩/∂θ_{l,q,k}` by the ±π/2 shift rule, shaped `[layers, qubits, 3, qubits]`.
pub fn parameter_shift_grad(x: &[f64], params: &EntanglingLayerParams, schedule: &CnotSchedule) -> Result<Tensor> {
    let state = amplitude_embed(x)?;
    let n = params.n_qubits();
    let count = params.angles().len();
    let mut out = vec![0.0; count * n];
    let mut shifted = params.clone();
    for j in 0..count {
        let orig = params.angles().data()[j];
        shifted.data_mut()[j] = orig + FRAC_PI_2;
        let plus = strongly_entangling_layers(&state, &shifted, schedule)?.pauli_z_expectations();
        shifted.data_mut()[j] = orig - FRAC_PI_2;
        let minus = strongly_entangling_layers(&state, &shifted, schedule)?.pauli_z_expectations();
        shifted.data_mut()[j] = orig;
        for i in 0..n {
            out[j * n + i] = (plus[i] - minus[i]) / 2.0;
        }
    }
    Tensor::new(vec![params.n_layers(), n, 3, n], out)
}

/// Row `i` is `∂⟨Z_i⟩/∂x = 2·Re[(U† Z_i U) x]` for real `x`, shaped `[qubits, 2^n]`.
/// Any normalization of `x` is the caller's chain rule.
pub fn input_adjoint_grad(x: &[f64], params: &EntanglingLayerParams, schedule: &CnotSchedule) -> Result<Tensor> {
    let state = amplitude_embed(x)?;
    let evolved = strongly_entangling_layers(&state, params, schedule)?;
    let n = evolved.n_qubits();
    let dim = x.len();
    let mut out = Vec::with_capacity(n * dim);
    for q in 0..n {
        let mask = 1 << (n - 1 - q);
        let flipped: Vec<Complex64> = evolved
            .amplitudes()
            .iter()
            .enumerate()
            .map(|(idx, &a)| if idx & mask == 0 { a } else { -a })
            .collect();
        // Z_i is unitary, so Z_i U x keeps unit norm
        let zu = QuantumState::from_amplitudes(flipped)?;
        let back = inverse_entangling_layers(&zu, params, schedule)?;
        out.extend(back.amplitudes().iter().map(|a| 2.0 * a.re));
    }
    Tensor::new(vec![n, dim], out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha20Rng;

    fn unit(rng: &mut impl Rng, dim: usize) -> Vec<f64> {
        let v: Vec<f64> = (0..dim).map(|_| rng.random_range(-1.0..1.0)).collect();
        let n = v.iter().map(|a| a * a).sum::<f64>().sqrt();
        v.into_iter().map(|a| a / n).collect()
    }

    #[test]
    fn identity_circuit_input_grad() {
        let mut rng = ChaCha20Rng::seed_from_u64(1);
        let x = unit(&mut rng, 16);
        let g = input_adjoint_grad(&x, &EntanglingLayerParams::zeros(1, 4), &CnotSchedule::empty(1)).unwrap();
        for q in 0..4 {
            for j in 0..16 {
                let sign = if j & (1 << (3 - q)) == 0 { 1.0 } else { -1.0 };
                assert!((g.data()[q * 16 + j] - 2.0 * sign * x[j]).abs() < 1e-14);
            }
        }
    }

    #[test]
    fn shift_grads_bounded() {
        let mut rng = ChaCha20Rng::seed_from_u64(2);
        let p = EntanglingLayerParams::random(2, 4, &mut rng);
        let g = parameter_shift_grad(&unit(&mut rng, 16), &p, &CnotSchedule::ring(4, 2)).unwrap();
        assert_eq!(g.shape(), &[2, 4, 3, 4]);
        assert!(g.data().iter().all(|v| v.abs() <= 1.0 + 1e-12));
    }
}
