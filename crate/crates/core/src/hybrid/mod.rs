//! CNN → amplitude-embedded PQC → dense classifier, with end-to-end gradients.

mod params;

pub use params::{Layer, LayerKind, LayeredParameters};

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{config_err, input_err, Result};
use crate::nn::{dense_backward, dense_forward, softmax_cross_entropy, CnnSpec, CnnTrace, ConvBlockSpec};
use crate::quantum::{
    amplitude_embed, input_adjoint_grad, parameter_shift_grad, strongly_entangling_layers, CnotSchedule,
    EntanglingLayerParams, MAX_QUBITS,
};
use crate::tensor::Tensor;

/// Floor on the normalization denominator.
pub const NORM_FLOOR: f64 = 1e-12;

pub const QUANTUM_LAYER: &str = "pqc";
pub const CLASSIFIER_LAYER: &str = "classifier";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ModelConfig {
    /// Output channels of each conv block.
    pub conv_channels: Vec<usize>,
    pub convs_per_block: usize,
    pub kernel_size: usize,
    pub stride: usize,
    pub padding: usize,
    pub pool_window: usize,
    /// Hidden dense widths between the conv stack and the PQC input.
    pub hidden: Vec<usize>,
    pub n_qubits: usize,
    pub n_pqc_layers: usize,
    pub n_classes: usize,
    /// Width of the CNN head. Derived as `2^n_qubits` when absent; if given it must agree.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub cnn_output_dim: Option<usize>,
}

impl Default for ModelConfig {
    fn default() -> Self {
        Self {
            conv_channels: vec![16, 32, 64],
            convs_per_block: 1,
            kernel_size: 3,
            stride: 1,
            padding: 1,
            pool_window: 2,
            hidden: vec![64],
            n_qubits: 4,
            n_pqc_layers: 2,
            n_classes: 10,
            cnn_output_dim: None,
        }
    }
}

impl ModelConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_qubits == 0 || self.n_qubits > MAX_QUBITS {
            return Err(config_err!("n_qubits must be in 1..={MAX_QUBITS}, got {}", self.n_qubits));
        }
        if let Some(d) = self.cnn_output_dim {
            if d != 1 << self.n_qubits {
                return Err(config_err!(
                    "cnn_output_dim = {d} but {} qubits need a head of width 2^{} = {}",
                    self.n_qubits,
                    self.n_qubits,
                    1usize << self.n_qubits
                ));
            }
        }
        if self.n_pqc_layers == 0 {
            return Err(config_err!("n_pqc_layers must be at least 1"));
        }
        if self.n_classes < 2 {
            return Err(config_err!("n_classes must be at least 2, got {}", self.n_classes));
        }
        if self.convs_per_block == 0 {
            return Err(config_err!("convs_per_block must be at least 1"));
        }
        Ok(())
    }

    pub fn head_width(&self) -> usize {
        1 << self.n_qubits
    }

    pub fn cnn_spec(&self, input_shape: [usize; 3]) -> Result<CnnSpec> {
        self.validate()?;
        let mut c = input_shape[0];
        let blocks = self
            .conv_channels
            .iter()
            .map(|&out| {
                let b = ConvBlockSpec {
                    in_channels: c,
                    out_channels: out,
                    kernel_size: self.kernel_size,
                    stride: self.stride,
                    padding: self.padding,
                    pool_window: self.pool_window,
                    convs: self.convs_per_block,
                };
                c = out;
                b
            })
            .collect();
        let mut widths = self.hidden.clone();
        widths.push(self.head_width());
        CnnSpec::new(input_shape, blocks, &widths)
    }
}

/// Unit vector `v / max(‖v‖, floor)` plus what its backward pass needs.
#[derive(Debug, Clone)]
pub struct Bridge {
    pub unit: Vec<f64>,
    denom: f64,
    degenerate: bool,
}

/// Normalizes the CNN output for amplitude embedding. A vector with norm
/// below the floor cannot be a state; it embeds as `|0…0⟩` and passes no gradient.
pub fn normalize_bridge(v: &[f64]) -> Bridge {
    let norm = v.iter().map(|a| a * a).sum::<f64>().sqrt();
    if norm < NORM_FLOOR {
        let mut unit = vec![0.0; v.len()];
        unit[0] = 1.0;
        return Bridge {
            unit,
            denom: NORM_FLOOR,
            degenerate: true,
        };
    }
    Bridge {
        unit: v.iter().map(|a| a / norm).collect(),
        denom: norm,
        degenerate: false,
    }
}

impl Bridge {
    /// `(I − x̂x̂ᵀ) g / ‖v‖`.
    pub fn backward(&self, g: &[f64]) -> Vec<f64> {
        if self.degenerate {
            return vec![0.0; g.len()];
        }
        let dot: f64 = self.unit.iter().zip(g).map(|(a, b)| a * b).sum();
        self.unit
            .iter()
            .zip(g)
            .map(|(x, gi)| (gi - x * dot) / self.denom)
            .collect()
    }
}

/// Intermediate values from one forward pass.
#[derive(Debug, Clone)]
pub struct ForwardTrace {
    cnn: CnnTrace,
    pub bridge: Bridge,
    /// `⟨Z_i⟩` per qubit.
    pub expectations: Vec<f64>,
    pub logits: Tensor,
}

#[derive(Debug, Clone)]
pub struct HybridModel {
    config: ModelConfig,
    cnn: CnnSpec,
    schedule: CnotSchedule,
}

impl HybridModel {
    pub fn new(config: ModelConfig, input_shape: [usize; 3]) -> Result<Self> {
        let cnn = config.cnn_spec(input_shape)?;
        let schedule = CnotSchedule::ring(config.n_qubits, config.n_pqc_layers);
        Ok(Self { config, cnn, schedule })
    }

    pub fn config(&self) -> &ModelConfig {
        &self.config
    }

    pub fn input_shape(&self) -> [usize; 3] {
        self.cnn.input_shape()
    }

    pub fn schedule(&self) -> &CnotSchedule {
        &self.schedule
    }

    pub fn cnn(&self) -> &CnnSpec {
        &self.cnn
    }

    fn classical_names(&self) -> Vec<String> {
        let mut names = Vec::with_capacity(self.cnn.layer_count());
        for (b, block) in self.cnn.blocks().iter().enumerate() {
            for k in 0..block.convs {
                names.push(if block.convs == 1 {
                    format!("conv{}", b + 1)
                } else {
                    format!("conv{}_{}", b + 1, k + 1)
                });
            }
        }
        for d in 0..self.cnn.dense_count() {
            names.push(format!("dense{}", d + 1));
        }
        names
    }

    /// Glorot-uniform classical weights, zero biases, PQC angles uniform in `[0, 2π)`.
    pub fn init<R: Rng + ?Sized>(&self, rng: &mut R) -> LayeredParameters {
        let mut layers: Vec<Layer> = self
            .classical_names()
            .into_iter()
            .zip(self.cnn.init(rng))
            .map(|(name, tensors)| Layer {
                name,
                kind: LayerKind::Classical,
                tensors,
            })
            .collect();
        let q = EntanglingLayerParams::random(self.config.n_pqc_layers, self.config.n_qubits, rng);
        layers.push(Layer {
            name: QUANTUM_LAYER.into(),
            kind: LayerKind::Quantum,
            tensors: vec![q.into_tensor()],
        });
        let n = self.config.n_qubits;
        let m = self.config.n_classes;
        layers.push(Layer {
            name: CLASSIFIER_LAYER.into(),
            kind: LayerKind::FinalClassifier,
            tensors: vec![crate::nn::glorot_uniform(&[m, n], n, m, rng), Tensor::zeros(&[m])],
        });
        LayeredParameters::new(layers).expect("fixed structure")
    }

    /// Checks that `params` has this model's layers and shapes.
    pub fn check(&self, params: &LayeredParameters) -> Result<()> {
        let expected = self.zero_params();
        if !expected.same_structure(params) {
            return Err(config_err!(
                "parameters {:?} do not match model layers {:?}",
                params.names(),
                expected.names()
            ));
        }
        Ok(())
    }

    /// All-zero parameters with this model's structure.
    pub fn zero_params(&self) -> LayeredParameters {
        let mut layers: Vec<Layer> = self
            .classical_names()
            .into_iter()
            .zip(self.cnn.layer_shapes())
            .map(|(name, [w, b])| Layer {
                name,
                kind: LayerKind::Classical,
                tensors: vec![Tensor::zeros(&w), Tensor::zeros(&b)],
            })
            .collect();
        let (n, m) = (self.config.n_qubits, self.config.n_classes);
        layers.push(Layer {
            name: QUANTUM_LAYER.into(),
            kind: LayerKind::Quantum,
            tensors: vec![Tensor::zeros(&[self.config.n_pqc_layers, n, 3])],
        });
        layers.push(Layer {
            name: CLASSIFIER_LAYER.into(),
            kind: LayerKind::FinalClassifier,
            tensors: vec![Tensor::zeros(&[m, n]), Tensor::zeros(&[m])],
        });
        LayeredParameters::new(layers).expect("fixed structure")
    }

    fn cnn_refs<'a>(&self, params: &'a LayeredParameters) -> Vec<&'a [Tensor]> {
        params.layers()[..self.cnn.layer_count()]
            .iter()
            .map(|l| l.tensors.as_slice())
            .collect()
    }

    fn quantum(&self, params: &LayeredParameters) -> Result<EntanglingLayerParams> {
        EntanglingLayerParams::new(params.layers()[params.quantum_index()].tensors[0].clone())
    }

    pub fn forward(&self, x: &Tensor, params: &LayeredParameters) -> Result<ForwardTrace> {
        let cnn = self.cnn.forward(x, &self.cnn_refs(params))?;
        let bridge = normalize_bridge(cnn.output.data());
        let q = self.quantum(params)?;
        let state = strongly_entangling_layers(&amplitude_embed(&bridge.unit)?, &q, &self.schedule)?;
        let expectations = state.pauli_z_expectations();
        let fc = &params.layers()[params.classifier_index()].tensors;
        let logits = dense_forward(&Tensor::from_vec(expectations.clone()), &fc[0], &fc[1])?;
        Ok(ForwardTrace {
            cnn,
            bridge,
            expectations,
            logits,
        })
    }

    pub fn logits(&self, x: &Tensor, params: &LayeredParameters) -> Result<Tensor> {
        Ok(self.forward(x, params)?.logits)
    }

    /// Parameter gradients of a scalar loss with `∂L/∂logits = grad_logits`.
    pub fn backward(&self, params: &LayeredParameters, trace: ForwardTrace, grad_logits: &Tensor) -> Result<LayeredParameters> {
        let mut grads = params.zeros_like();
        let fc_idx = params.classifier_index();
        let q_idx = params.quantum_index();
        let fc = &params.layers()[fc_idx].tensors;
        let z = Tensor::from_vec(trace.expectations);
        let dg = dense_backward(&z, &fc[0], &fc[1], grad_logits)?;
        grads.layers_mut()[fc_idx].tensors = vec![dg.weight, dg.bias];
        let gz = dg.input.into_data();

        let q = self.quantum(params)?;
        let n = self.config.n_qubits;
        let shift = parameter_shift_grad(&trace.bridge.unit, &q, &self.schedule)?;
        let gq: Vec<f64> = shift
            .data()
            .chunks_exact(n)
            .map(|row| row.iter().zip(&gz).map(|(a, b)| a * b).sum())
            .collect();
        grads.layers_mut()[q_idx].tensors = vec![Tensor::new(q.angles().shape().to_vec(), gq)?];

        let adj = input_adjoint_grad(&trace.bridge.unit, &q, &self.schedule)?;
        let dim = trace.bridge.unit.len();
        let mut gx = vec![0.0; dim];
        for (i, row) in adj.data().chunks_exact(dim).enumerate() {
            for (g, a) in gx.iter_mut().zip(row) {
                *g += gz[i] * a;
            }
        }
        let gv = Tensor::from_vec(trace.bridge.backward(&gx));
        let cnn_grads = self.cnn.backward(&self.cnn_refs(params), &trace.cnn, &gv)?;
        for (layer, g) in grads.layers_mut().iter_mut().zip(cnn_grads) {
            layer.tensors = g;
        }
        Ok(grads)
    }

    /// Mean cross-entropy over the batch and its gradient. Per-sample work
    /// runs in parallel; the reduction is in sample order.
    pub fn loss_and_grads(&self, images: &[&Tensor], labels: &[usize], params: &LayeredParameters) -> Result<(f64, LayeredParameters)> {
        if images.is_empty() {
            return Err(input_err!("empty batch"));
        }
        if images.len() != labels.len() {
            return Err(input_err!("{} images but {} labels", images.len(), labels.len()));
        }
        let per_sample: Vec<Result<(f64, LayeredParameters)>> = images
            .par_iter()
            .zip(labels.par_iter())
            .map(|(x, &y)| {
                let trace = self.forward(x, params)?;
                let (loss, g) = softmax_cross_entropy(&trace.logits, y)?;
                Ok((loss, self.backward(params, trace, &g)?))
            })
            .collect();
        let mut total = 0.0;
        let mut grads = params.zeros_like();
        for r in per_sample {
            let (l, g) = r?;
            total += l;
            grads.axpy(1.0, &g)?;
        }
        let inv = 1.0 / images.len() as f64;
        grads.scale(inv);
        Ok((total * inv, grads))
    }

    /// Mean loss only (no gradients), in sample order.
    pub fn mean_loss(&self, images: &[&Tensor], labels: &[usize], params: &LayeredParameters) -> Result<f64> {
        if images.is_empty() {
            return Err(input_err!("empty batch"));
        }
        let mut total = 0.0;
        for (x, &y) in images.iter().zip(labels) {
            total += softmax_cross_entropy(&self.logits(x, params)?, y)?.0;
        }
        Ok(total / images.len() as f64)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha20Rng;

    fn tiny() -> HybridModel {
        let cfg = ModelConfig {
            conv_channels: vec![2],
            hidden: vec![],
            n_classes: 3,
            ..ModelConfig::default()
        };
        HybridModel::new(cfg, [1, 4, 4]).unwrap()
    }

    #[test]
    fn layer_names_and_kinds() {
        let m = HybridModel::new(ModelConfig::default(), [3, 32, 32]).unwrap();
        let p = m.init(&mut ChaCha20Rng::seed_from_u64(0));
        assert_eq!(p.names(), ["conv1", "conv2", "conv3", "dense1", "dense2", "pqc", "classifier"]);
        assert_eq!(p.layer("dense2").unwrap().tensors[0].shape(), &[16, 64]);
        assert_eq!(p.layer("classifier").unwrap().tensors[0].shape(), &[10, 4]);
        m.check(&p).unwrap();

        let cfg = ModelConfig {
            convs_per_block: 2,
            ..ModelConfig::default()
        };
        let m = HybridModel::new(cfg, [1, 8, 8]).unwrap();
        let p = m.init(&mut ChaCha20Rng::seed_from_u64(0));
        assert_eq!(&p.names()[..3], ["conv1_1", "conv1_2", "conv2_1"]);
    }

    #[test]
    fn head_width_must_match_qubits() {
        let cfg = ModelConfig {
            n_qubits: 3,
            cnn_output_dim: Some(16),
            ..ModelConfig::default()
        };
        let err = cfg.validate().unwrap_err().to_string();
        assert!(err.contains("2^3 = 8"), "{err}");
        let auto = ModelConfig {
            n_qubits: 3,
            ..ModelConfig::default()
        };
        assert_eq!(auto.head_width(), 8);
    }

    #[test]
    fn bridge_examples() {
        let mut v = vec![0.0; 16];
        v[3] = 1.0;
        assert_eq!(normalize_bridge(&v).unit, v);
        let mut v = vec![0.0; 16];
        v[0] = 2.0;
        assert_eq!(normalize_bridge(&v).unit[0], 1.0);
        let b = normalize_bridge(&[0.0; 4]);
        assert_eq!(b.unit, vec![1.0, 0.0, 0.0, 0.0]);
        assert_eq!(b.backward(&[1.0; 4]), vec![0.0; 4]);
    }

    #[test]
    fn bridge_jvp_matches_finite_differences() {
        let mut rng = ChaCha20Rng::seed_from_u64(5);
        let v: Vec<f64> = (0..16).map(|_| rng.random_range(-2.0..2.0)).collect();
        let g: Vec<f64> = (0..16).map(|_| rng.random_range(-1.0..1.0)).collect();
        let analytic = normalize_bridge(&v).backward(&g);
        let f = |v: &[f64]| -> f64 { normalize_bridge(v).unit.iter().zip(&g).map(|(a, b)| a * b).sum() };
        let h = 1e-6;
        for k in 0..16 {
            let mut p = v.clone();
            p[k] += h;
            let mut m = v.clone();
            m[k] -= h;
            let numeric = (f(&p) - f(&m)) / (2.0 * h);
            assert!((numeric - analytic[k]).abs() < 1e-6, "{k}: {numeric} vs {}", analytic[k]);
        }
        // directional derivative along v itself vanishes
        let along: f64 = analytic.iter().zip(&v).map(|(a, b)| a * b).sum();
        assert!(along.abs() < 1e-12);
    }

    #[test]
    fn forward_shapes_and_determinism() {
        let m = tiny();
        let p = m.init(&mut ChaCha20Rng::seed_from_u64(1));
        let x = Tensor::new(vec![1, 4, 4], (0..16).map(|i| (i as f64 * 0.37).sin()).collect()).unwrap();
        let a = m.forward(&x, &p).unwrap();
        let b = m.forward(&x, &p).unwrap();
        assert_eq!(a.logits.len(), 3);
        assert_eq!(a.logits, b.logits);
        assert!(a.expectations.iter().all(|z| (-1.0..=1.0).contains(z)));
    }

    #[test]
    fn zero_classifier_blocks_quantum_gradient() {
        let m = tiny();
        let mut p = m.init(&mut ChaCha20Rng::seed_from_u64(2));
        let fc = p.classifier_index();
        p.layers_mut()[fc].tensors[0] = Tensor::zeros(&[3, 4]);
        let x = Tensor::filled(&[1, 4, 4], 0.5);
        let (_, g) = m.loss_and_grads(&[&x], &[1], &p).unwrap();
        assert!(g.layer(QUANTUM_LAYER).unwrap().tensors[0].data().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn uniform_logits_loss_is_ln_m() {
        let m = tiny();
        let mut p = m.init(&mut ChaCha20Rng::seed_from_u64(3));
        let fc = p.classifier_index();
        p.layers_mut()[fc].tensors[0] = Tensor::zeros(&[3, 4]);
        let xs: Vec<Tensor> = (0..3).map(|i| Tensor::filled(&[1, 4, 4], i as f64)).collect();
        let refs: Vec<&Tensor> = xs.iter().collect();
        let (loss, _) = m.loss_and_grads(&refs, &[0, 1, 2], &p).unwrap();
        assert!((loss - 3f64.ln()).abs() < 1e-12);
        assert!(m.loss_and_grads(&[], &[], &p).is_err());
    }
}
