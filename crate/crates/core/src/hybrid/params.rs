use crate::error::{config_err, Result};
use crate::tensor::Tensor;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum LayerKind {
    Classical,
    Quantum,
    FinalClassifier,
}

impl LayerKind {
    pub fn as_str(self) -> &'static str {
        match self {
            LayerKind::Classical => "classical",
            LayerKind::Quantum => "quantum",
            LayerKind::FinalClassifier => "final_classifier",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Layer {
    pub name: String,
    pub kind: LayerKind,
    pub tensors: Vec<Tensor>,
}

impl Layer {
    pub fn param_count(&self) -> usize {
        self.tensors.iter().map(Tensor::len).sum()
    }

    /// All tensors concatenated in order.
    pub fn flatten(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.param_count());
        for t in &self.tensors {
            out.extend_from_slice(t.data());
        }
        out
    }

    /// Inverse of [`Layer::flatten`] into this layer's shapes.
    pub fn unflatten_from(&mut self, values: &[f64]) -> Result<()> {
        if values.len() != self.param_count() {
            return Err(config_err!(
                "layer {} has {} parameters, got {}",
                self.name,
                self.param_count(),
                values.len()
            ));
        }
        let mut off = 0;
        for t in &mut self.tensors {
            let n = t.len();
            t.data_mut().copy_from_slice(&values[off..off + n]);
            off += n;
        }
        Ok(())
    }

    fn same_shape(&self, other: &Layer) -> bool {
        self.name == other.name
            && self.kind == other.kind
            && self.tensors.len() == other.tensors.len()
            && self.tensors.iter().zip(&other.tensors).all(|(a, b)| a.shape() == b.shape())
    }
}

/// The model's parameters as an ordered list of named layers.
#[derive(Debug, Clone, PartialEq)]
pub struct LayeredParameters {
    layers: Vec<Layer>,
}

impl LayeredParameters {
    /// Requires unique names, exactly one quantum and one final-classifier layer.
    pub fn new(layers: Vec<Layer>) -> Result<Self> {
        let count = |k| layers.iter().filter(|l| l.kind == k).count();
        if count(LayerKind::Quantum) != 1 || count(LayerKind::FinalClassifier) != 1 {
            return Err(config_err!("parameters need exactly one quantum and one final-classifier layer"));
        }
        for (i, l) in layers.iter().enumerate() {
            if layers[..i].iter().any(|o| o.name == l.name) {
                return Err(config_err!("duplicate layer name {}", l.name));
            }
        }
        Ok(Self { layers })
    }

    pub fn layers(&self) -> &[Layer] {
        &self.layers
    }

    pub fn layers_mut(&mut self) -> &mut [Layer] {
        &mut self.layers
    }

    pub fn len(&self) -> usize {
        self.layers.len()
    }

    pub fn is_empty(&self) -> bool {
        self.layers.is_empty()
    }

    pub fn layer(&self, name: &str) -> Option<&Layer> {
        self.layers.iter().find(|l| l.name == name)
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.layers.iter().position(|l| l.name == name)
    }

    pub fn names(&self) -> Vec<&str> {
        self.layers.iter().map(|l| l.name.as_str()).collect()
    }

    pub fn param_count(&self) -> usize {
        self.layers.iter().map(Layer::param_count).sum()
    }

    pub fn quantum_index(&self) -> usize {
        self.layers.iter().position(|l| l.kind == LayerKind::Quantum).expect("validated")
    }

    pub fn classifier_index(&self) -> usize {
        self.layers
            .iter()
            .position(|l| l.kind == LayerKind::FinalClassifier)
            .expect("validated")
    }

    pub fn same_structure(&self, other: &Self) -> bool {
        self.layers.len() == other.layers.len() && self.layers.iter().zip(&other.layers).all(|(a, b)| a.same_shape(b))
    }

    pub fn zeros_like(&self) -> Self {
        Self {
            layers: self
                .layers
                .iter()
                .map(|l| Layer {
                    name: l.name.clone(),
                    kind: l.kind,
                    tensors: l.tensors.iter().map(Tensor::zeros_like).collect(),
                })
                .collect(),
        }
    }

    /// `self += alpha * other` over every tensor.
    pub fn axpy(&mut self, alpha: f64, other: &Self) -> Result<()> {
        if !self.same_structure(other) {
            return Err(config_err!("parameter structures differ"));
        }
        for (a, b) in self.layers.iter_mut().zip(&other.layers) {
            for (ta, tb) in a.tensors.iter_mut().zip(&b.tensors) {
                ta.axpy(alpha, tb)?;
            }
        }
        Ok(())
    }

    pub fn scale(&mut self, alpha: f64) {
        for l in &mut self.layers {
            for t in &mut l.tensors {
                t.scale(alpha);
            }
        }
    }

    pub fn is_finite(&self) -> bool {
        self.layers.iter().all(|l| l.tensors.iter().all(Tensor::is_finite))
    }

    /// Every coordinate in layer order, for finite-difference probes.
    pub fn flatten(&self) -> Vec<f64> {
        self.layers.iter().flat_map(|l| l.flatten()).collect()
    }
}
