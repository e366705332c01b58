//! Exact state-vector simulation of the parameterized circuit.

pub mod circuit;
pub mod grad;
pub mod state;

pub use circuit::{inverse_entangling_layers, strongly_entangling_layers, CnotSchedule, EntanglingLayerParams};
pub use grad::{expectations, input_adjoint_grad, parameter_shift_grad};
pub use state::{amplitude_embed, rotation_matrix, Axis, QuantumState, MAX_QUBITS};
