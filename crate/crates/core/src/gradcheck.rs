//! Finite-difference check of the hybrid model's backward pass on a reduced
//! architecture: 1×4×4 input, one single-channel conv block, dense to 16,
//! a 4-qubit 2-layer circuit, and a 3-class classifier.

use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;

use crate::error::Result;
use crate::hybrid::{HybridModel, LayerKind, LayeredParameters, ModelConfig};
use crate::tensor::Tensor;

pub const STEP: f64 = 1e-5;
/// Denominator floor so coordinates with vanishing gradient do not divide by zero.
pub const RELATIVE_FLOOR: f64 = 1e-6;
pub const TOLERANCE: f64 = 1e-3;

#[derive(Debug, Clone)]
pub struct CoordinateCheck {
    pub layer: String,
    pub kind: LayerKind,
    pub tensor: usize,
    pub index: usize,
    pub analytic: f64,
    pub numeric: f64,
    pub relative_error: f64,
}

#[derive(Debug, Clone)]
pub struct GradCheckReport {
    pub coordinates: Vec<CoordinateCheck>,
}

impl GradCheckReport {
    pub fn max_relative_error(&self) -> f64 {
        self.coordinates.iter().map(|c| c.relative_error).fold(0.0, f64::max)
    }

    pub fn worst(&self) -> Option<&CoordinateCheck> {
        self.coordinates
            .iter()
            .max_by(|a, b| a.relative_error.total_cmp(&b.relative_error))
    }

    pub fn count(&self, kind: LayerKind) -> usize {
        self.coordinates.iter().filter(|c| c.kind == kind).count()
    }

    pub fn passed(&self) -> bool {
        self.max_relative_error() <= TOLERANCE
    }
}

pub fn relative_error(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(RELATIVE_FLOOR)
}

pub fn reduced_model() -> HybridModel {
    let cfg = ModelConfig {
        conv_channels: vec![1],
        hidden: vec![],
        n_qubits: 4,
        n_pqc_layers: 2,
        n_classes: 3,
        ..ModelConfig::default()
    };
    HybridModel::new(cfg, [1, 4, 4]).expect("valid reduced architecture")
}

/// Compares backprop with central differences on up to `per_group`
/// random coordinates of each layer kind, over a 2-sample batch.
pub fn run(seed: u64, per_group: usize) -> Result<GradCheckReport> {
    let model = reduced_model();
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let mut params = model.init(&mut rng);
    // non-zero biases so every coordinate carries signal
    for layer in params.layers_mut() {
        if layer.kind != LayerKind::Quantum {
            for v in layer.tensors[1].data_mut() {
                *v = rng.random_range(-0.2..0.2);
            }
        }
    }
    let images: Vec<Tensor> = (0..2)
        .map(|_| Tensor::new(vec![1, 4, 4], (0..16).map(|_| rng.random_range(-1.0..1.0)).collect()))
        .collect::<Result<_>>()?;
    let labels: Vec<usize> = (0..2).map(|_| rng.random_range(0..3)).collect();
    let refs: Vec<&Tensor> = images.iter().collect();
    let (_, grads) = model.loss_and_grads(&refs, &labels, &params)?;

    let mut coordinates = Vec::new();
    for kind in [LayerKind::Classical, LayerKind::Quantum, LayerKind::FinalClassifier] {
        let pool: Vec<(usize, usize, usize)> = params
            .layers()
            .iter()
            .enumerate()
            .filter(|(_, l)| l.kind == kind)
            .flat_map(|(li, l)| {
                l.tensors
                    .iter()
                    .enumerate()
                    .flat_map(move |(ti, t)| (0..t.len()).map(move |k| (li, ti, k)))
            })
            .collect();
        let take = per_group.min(pool.len());
        let mut picks = sample(&mut rng, pool.len(), take).into_vec();
        picks.sort_unstable();
        for p in picks {
            let (li, ti, k) = pool[p];
            let numeric = central_difference(&model, &refs, &labels, &mut params, li, ti, k)?;
            let analytic = grads.layers()[li].tensors[ti].data()[k];
            coordinates.push(CoordinateCheck {
                layer: params.layers()[li].name.clone(),
                kind,
                tensor: ti,
                index: k,
                analytic,
                numeric,
                relative_error: relative_error(analytic, numeric),
            });
        }
    }
    Ok(GradCheckReport { coordinates })
}

fn central_difference(
    model: &HybridModel,
    images: &[&Tensor],
    labels: &[usize],
    params: &mut LayeredParameters,
    li: usize,
    ti: usize,
    k: usize,
) -> Result<f64> {
    let orig = params.layers()[li].tensors[ti].data()[k];
    params.layers_mut()[li].tensors[ti].data_mut()[k] = orig + STEP;
    let plus = model.mean_loss(images, labels, params)?;
    params.layers_mut()[li].tensors[ti].data_mut()[k] = orig - STEP;
    let minus = model.mean_loss(images, labels, params)?;
    params.layers_mut()[li].tensors[ti].data_mut()[k] = orig;
    Ok((plus - minus) / (2.0 * STEP))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn relative_error_floor() {
        assert_eq!(relative_error(1.0, 1.0), 0.0);
        assert!((relative_error(2.0, 1.0) - 0.5).abs() < 1e-15);
        assert!((relative_error(0.0, 1e-9) - 1e-3).abs() < 1e-12);
    }

    #[test]
    fn small_check_passes() {
        let r = run(11, 4).unwrap();
        assert_eq!(r.coordinates.len(), 12);
        assert!(r.passed(), "{:?}", r.worst());
    }
}
