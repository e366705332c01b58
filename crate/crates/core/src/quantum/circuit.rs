use std::f64::consts::TAU;

use rand::Rng;

use super::state::{Axis, QuantumState};
use crate::error::{config_err, Result};
use crate::tensor::Tensor;

/// Rotation angles `[n_layers, n_qubits, 3]` for the R_z → R_y → R_z cascade.
#[derive(Debug, Clone, PartialEq)]
pub struct EntanglingLayerParams {
    angles: Tensor,
}

impl EntanglingLayerParams {
    pub fn new(angles: Tensor) -> Result<Self> {
        match angles.shape() {
            [l, n, 3] if *l > 0 && *n > 0 => {}
            s => return Err(config_err!("entangling angles must be [layers, qubits, 3], got {s:?}")),
        }
        if !angles.is_finite() {
            return Err(config_err!("entangling angles contain non-finite values"));
        }
        Ok(Self { angles })
    }

    pub fn zeros(n_layers: usize, n_qubits: usize) -> Self {
        Self {
            angles: Tensor::zeros(&[n_layers, n_qubits, 3]),
        }
    }

    /// Angles uniform in `[0, 2π)`.
    pub fn random<R: Rng + ?Sized>(n_layers: usize, n_qubits: usize, rng: &mut R) -> Self {
        let data = (0..n_layers * n_qubits * 3).map(|_| rng.random_range(0.0..TAU)).collect();
        Self {
            angles: Tensor::new(vec![n_layers, n_qubits, 3], data).expect("sized"),
        }
    }

    pub fn n_layers(&self) -> usize {
        self.angles.shape()[0]
    }

    pub fn n_qubits(&self) -> usize {
        self.angles.shape()[1]
    }

    pub fn angles(&self) -> &Tensor {
        &self.angles
    }

    pub fn into_tensor(self) -> Tensor {
        self.angles
    }

    #[inline]
    pub fn index(&self, layer: usize, qubit: usize, k: usize) -> usize {
        (layer * self.n_qubits() + qubit) * 3 + k
    }

    pub fn get(&self, layer: usize, qubit: usize, k: usize) -> f64 {
        self.angles.data()[self.index(layer, qubit, k)]
    }

    pub(crate) fn data_mut(&mut self) -> &mut [f64] {
        self.angles.data_mut()
    }
}

/// CNOT pairs `(control, target)` applied after each layer's rotations.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CnotSchedule {
    layers: Vec<Vec<(usize, usize)>>,
}

impl CnotSchedule {
    pub fn new(n_qubits: usize, layers: Vec<Vec<(usize, usize)>>) -> Result<Self> {
        for (l, pairs) in layers.iter().enumerate() {
            for &(c, t) in pairs {
                if c == t || c >= n_qubits || t >= n_qubits {
                    return Err(config_err!("layer {l}: invalid CNOT pair ({c}, {t}) for {n_qubits} qubits"));
                }
            }
        }
        Ok(Self { layers })
    }

    /// Layer `l` (1-based `l+1`) couples `(i, (i + r) mod n)` with
    /// `r = (l mod (n−1)) + 1`. A single qubit has no pairs.
    pub fn ring(n_qubits: usize, n_layers: usize) -> Self {
        let layers = (0..n_layers)
            .map(|l| {
                if n_qubits < 2 {
                    return Vec::new();
                }
                let r = l % (n_qubits - 1) + 1;
                (0..n_qubits).map(|i| (i, (i + r) % n_qubits)).collect()
            })
            .collect();
        Self { layers }
    }

    pub fn empty(n_layers: usize) -> Self {
        Self {
            layers: vec![Vec::new(); n_layers],
        }
    }

    pub fn n_layers(&self) -> usize {
        self.layers.len()
    }

    pub fn layer(&self, l: usize) -> &[(usize, usize)] {
        &self.layers[l]
    }
}

fn check(state: &QuantumState, params: &EntanglingLayerParams, schedule: &CnotSchedule) -> Result<()> {
    if params.n_layers() != schedule.n_layers() {
        return Err(config_err!(
            "{} angle layers but {} CNOT layers",
            params.n_layers(),
            schedule.n_layers()
        ));
    }
    if params.n_qubits() != state.n_qubits() {
        return Err(config_err!(
            "angles for {} qubits applied to a {}-qubit state",
            params.n_qubits(),
            state.n_qubits()
        ));
    }
    Ok(())
}

fn apply_layer(state: &mut QuantumState, params: &EntanglingLayerParams, schedule: &CnotSchedule, l: usize) -> Result<()> {
    for q in 0..params.n_qubits() {
        state.apply_rotation(q, Axis::Z, params.get(l, q, 0))?;
        state.apply_rotation(q, Axis::Y, params.get(l, q, 1))?;
        state.apply_rotation(q, Axis::Z, params.get(l, q, 2))?;
    }
    for &(c, t) in schedule.layer(l) {
        state.apply_cnot(c, t)?;
    }
    Ok(())
}

pub fn strongly_entangling_layers(
    state: &QuantumState,
    params: &EntanglingLayerParams,
    schedule: &CnotSchedule,
) -> Result<QuantumState> {
    check(state, params, schedule)?;
    let mut s = state.clone();
    for l in 0..params.n_layers() {
        apply_layer(&mut s, params, schedule, l)?;
    }
    Ok(s)
}

/// `U†` applied to `state`: the layers undone in reverse order.
pub fn inverse_entangling_layers(
    state: &QuantumState,
    params: &EntanglingLayerParams,
    schedule: &CnotSchedule,
) -> Result<QuantumState> {
    check(state, params, schedule)?;
    let mut s = state.clone();
    for l in (0..params.n_layers()).rev() {
        for &(c, t) in schedule.layer(l).iter().rev() {
            s.apply_cnot(c, t)?;
        }
        for q in (0..params.n_qubits()).rev() {
            s.apply_rotation(q, Axis::Z, -params.get(l, q, 2))?;
            s.apply_rotation(q, Axis::Y, -params.get(l, q, 1))?;
            s.apply_rotation(q, Axis::Z, -params.get(l, q, 0))?;
        }
    }
    Ok(s)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quantum::state::amplitude_embed;
    use rand::SeedableRng;
    use rand_chacha::ChaCha20Rng;

    #[test]
    fn ring_schedule_ranges() {
        let s = CnotSchedule::ring(4, 3);
        assert_eq!(s.layer(0), &[(0, 1), (1, 2), (2, 3), (3, 0)]);
        assert_eq!(s.layer(1), &[(0, 2), (1, 3), (2, 0), (3, 1)]);
        assert_eq!(s.layer(2), &[(0, 3), (1, 0), (2, 1), (3, 2)]);
        assert!(CnotSchedule::ring(1, 2).layer(1).is_empty());
        assert!(CnotSchedule::new(2, vec![vec![(0, 0)]]).is_err());
        assert!(CnotSchedule::new(2, vec![vec![(0, 2)]]).is_err());
    }

    #[test]
    fn zero_angles_leave_zero_state() {
        let zero = QuantumState::zero(4).unwrap();
        let out = strongly_entangling_layers(&zero, &EntanglingLayerParams::zeros(2, 4), &CnotSchedule::ring(4, 2)).unwrap();
        assert_eq!(out, zero);
    }

    #[test]
    fn zero_angles_equal_cnots_alone() {
        let v: Vec<f64> = (0..16).map(|i| (i * 7 % 5) as f64 + 0.5).collect();
        let n = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        let x = amplitude_embed(&v.iter().map(|a| a / n).collect::<Vec<_>>()).unwrap();
        let sched = CnotSchedule::ring(4, 2);
        let out = strongly_entangling_layers(&x, &EntanglingLayerParams::zeros(2, 4), &sched).unwrap();
        let mut manual = x.clone();
        for l in 0..2 {
            for &(c, t) in sched.layer(l) {
                manual.apply_cnot(c, t).unwrap();
            }
        }
        for (a, b) in out.amplitudes().iter().zip(manual.amplitudes()) {
            assert!((a - b).norm() < 1e-15);
        }
    }

    #[test]
    fn inverse_undoes_forward() {
        let mut rng = ChaCha20Rng::seed_from_u64(4);
        let p = EntanglingLayerParams::random(3, 4, &mut rng);
        let sched = CnotSchedule::ring(4, 3);
        let x = QuantumState::zero(4).unwrap();
        let back = inverse_entangling_layers(&strongly_entangling_layers(&x, &p, &sched).unwrap(), &p, &sched).unwrap();
        for (a, b) in back.amplitudes().iter().zip(x.amplitudes()) {
            assert!((a - b).norm() < 1e-12);
        }
    }

    #[test]
    fn shape_mismatch() {
        let x = QuantumState::zero(4).unwrap();
        assert!(strongly_entangling_layers(&x, &EntanglingLayerParams::zeros(2, 4), &CnotSchedule::ring(4, 3)).is_err());
        assert!(strongly_entangling_layers(&x, &EntanglingLayerParams::zeros(2, 3), &CnotSchedule::ring(3, 2)).is_err());
        assert!(EntanglingLayerParams::new(Tensor::zeros(&[2, 4, 2])).is_err());
    }
}
