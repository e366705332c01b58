//! Server side of a round: softmax weights from privatized accuracies,
//! weighted aggregation (encrypted for the final classifier), and
//! EMA-based layer freezing.

use hqfl_ckks::{Ciphertext, CkksContext, SecretKey};

use crate::error::{config_err, input_err, Error, Result};
use crate::hybrid::{LayerKind, LayeredParameters};
use crate::tensor::Tensor;
use crate::update::ClientUpdate;

#[derive(Debug, Clone, PartialEq)]
pub struct AggregationWeights {
    pub weights: Vec<f64>,
    pub tau: f64,
}

/// `w_i = exp((a_i − max a)/τ) / Σ_k exp((a_k − max a)/τ)`.
pub fn compute_weights(accuracies: &[f64], tau: f64) -> Result<AggregationWeights> {
    if !(tau > 0.0 && tau.is_finite()) {
        return Err(config_err!("temperature must be positive, got {tau}"));
    }
    if accuracies.is_empty() {
        return Err(input_err!("no accuracies to weight"));
    }
    if let Some(a) = accuracies.iter().find(|a| !(0.0..=1.0).contains(*a)) {
        return Err(input_err!("accuracy {a} outside [0, 1]"));
    }
    let max = accuracies.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = accuracies.iter().map(|a| ((a - max) / tau).exp()).collect();
    let sum: f64 = exps.iter().sum();
    Ok(AggregationWeights {
        weights: exps.into_iter().map(|e| e / sum).collect(),
        tau,
    })
}

/// `‖now − prev‖₂` over all of a layer's tensors.
pub fn layer_importance(now: &[Tensor], prev: &[Tensor]) -> Result<f64> {
    if now.len() != prev.len() {
        return Err(input_err!("layer has {} tensors now, {} before", now.len(), prev.len()));
    }
    let mut sq = 0.0;
    for (a, b) in now.iter().zip(prev) {
        if a.shape() != b.shape() {
            return Err(input_err!("tensor shape {:?} vs {:?}", a.shape(), b.shape()));
        }
        sq += a.sq_distance(b)?;
    }
    Ok(sq.sqrt())
}

pub fn update_ema(prev: f64, score: f64, alpha: f64) -> f64 {
    alpha * prev + (1.0 - alpha) * score
}

/// Per-layer smoothed importance and frozen flags.
#[derive(Debug, Clone, PartialEq)]
pub struct FreezeState {
    names: Vec<String>,
    kinds: Vec<LayerKind>,
    /// `None` until the first observation.
    ema: Vec<Option<f64>>,
    frozen: Vec<bool>,
    pub threshold: f64,
    pub ema_alpha: f64,
}

impl FreezeState {
    pub fn new(params: &LayeredParameters, threshold: f64, ema_alpha: f64) -> Result<Self> {
        if threshold.is_nan() || threshold < 0.0 {
            return Err(config_err!("freeze threshold must be non-negative, got {threshold}"));
        }
        if !(0.0..=1.0).contains(&ema_alpha) {
            return Err(config_err!("EMA alpha must lie in [0, 1], got {ema_alpha}"));
        }
        Ok(Self {
            names: params.layers().iter().map(|l| l.name.clone()).collect(),
            kinds: params.layers().iter().map(|l| l.kind).collect(),
            ema: vec![None; params.len()],
            frozen: vec![false; params.len()],
            threshold,
            ema_alpha,
        })
    }

    pub fn is_frozen(&self, layer: usize) -> bool {
        self.frozen[layer]
    }

    pub fn frozen(&self) -> &[bool] {
        &self.frozen
    }

    pub fn frozen_names(&self) -> Vec<String> {
        self.names
            .iter()
            .zip(&self.frozen)
            .filter(|(_, &f)| f)
            .map(|(n, _)| n.clone())
            .collect()
    }

    pub fn ema(&self) -> Vec<Option<f64>> {
        self.ema.clone()
    }

    /// Folds the round's importance scores into the EMA. The first
    /// observation initializes the average to the score itself.
    pub fn observe(&mut self, prev: &LayeredParameters, now: &LayeredParameters) -> Result<Vec<f64>> {
        if prev.len() != self.names.len() || now.len() != self.names.len() {
            return Err(config_err!("freeze state tracks {} layers", self.names.len()));
        }
        let mut scores = Vec::with_capacity(self.names.len());
        for (i, (a, b)) in now.layers().iter().zip(prev.layers()).enumerate() {
            let s = layer_importance(&a.tensors, &b.tensors)?;
            self.ema[i] = Some(match self.ema[i] {
                None => s,
                Some(p) => update_ema(p, s, self.ema_alpha),
            });
            scores.push(s);
        }
        Ok(scores)
    }

    /// Sets flags from the current EMA: frozen iff `s̄ < threshold` and not
    /// quantum. Flags never clear. Returns the indices frozen by this call.
    pub fn apply_mask(&mut self) -> Vec<usize> {
        let next = freeze_mask(self);
        let newly: Vec<usize> = (0..self.frozen.len())
            .filter(|&i| next.frozen[i] && !self.frozen[i])
            .collect();
        *self = next;
        newly
    }
}

/// The state with flags recomputed from its EMA scores.
pub fn freeze_mask(state: &FreezeState) -> FreezeState {
    let mut next = state.clone();
    for i in 0..next.frozen.len() {
        let below = matches!(state.ema[i], Some(s) if s < state.threshold);
        next.frozen[i] = state.frozen[i] || (below && state.kinds[i] != LayerKind::Quantum);
    }
    next
}

/// Weighted aggregation. Frozen layers are copied from `prev_global`; the
/// final classifier goes through the encrypted weighted sum and is decrypted
/// with `secret`.
pub fn aggregate(
    updates: &[ClientUpdate],
    weights: &AggregationWeights,
    freeze: &FreezeState,
    prev_global: &LayeredParameters,
    ctx: &CkksContext,
    secret: &SecretKey,
) -> Result<LayeredParameters> {
    if updates.is_empty() {
        return Err(input_err!("no client updates"));
    }
    if updates.len() != weights.weights.len() {
        return Err(input_err!("{} updates but {} weights", updates.len(), weights.weights.len()));
    }
    let mut global = prev_global.clone();
    let expected_plain: Vec<&str> = prev_global
        .layers()
        .iter()
        .enumerate()
        .filter(|(i, l)| !freeze.is_frozen(*i) && l.kind != LayerKind::FinalClassifier)
        .map(|(_, l)| l.name.as_str())
        .collect();
    for u in updates {
        let names: Vec<&str> = u.layers.iter().map(|l| l.name.as_str()).collect();
        if names != expected_plain {
            return Err(Error::Protocol(format!(
                "client {} sent layers {names:?}, expected {expected_plain:?}",
                u.client_id
            )));
        }
    }

    for (i, layer) in global.layers_mut().iter_mut().enumerate() {
        if freeze.is_frozen(i) {
            continue;
        }
        if layer.kind == LayerKind::FinalClassifier {
            let cts: Vec<Ciphertext> = updates
                .iter()
                .map(|u| {
                    u.classifier
                        .clone()
                        .ok_or_else(|| Error::Protocol(format!("client {} omitted the classifier ciphertext", u.client_id)))
                })
                .collect::<Result<_>>()?;
            let sum = ctx.secure_weighted_sum(&cts, &weights.weights)?;
            let values = ctx.decrypt_values(&sum, secret, layer.param_count())?;
            layer.unflatten_from(&values)?;
            continue;
        }
        let pos = expected_plain.iter().position(|n| *n == layer.name).expect("listed above");
        for u in updates {
            let src = &u.layers[pos].tensors;
            if src.len() != layer.tensors.len() || src.iter().zip(&layer.tensors).any(|(a, b)| a.shape() != b.shape()) {
                return Err(Error::Protocol(format!(
                    "client {} layer {} has shapes {:?}, expected {:?}",
                    u.client_id,
                    layer.name,
                    src.iter().map(|t| t.shape().to_vec()).collect::<Vec<_>>(),
                    layer.tensors.iter().map(|t| t.shape().to_vec()).collect::<Vec<_>>()
                )));
            }
        }
        for (ti, t) in layer.tensors.iter_mut().enumerate() {
            let mut acc = t.zeros_like();
            for (u, &w) in updates.iter().zip(&weights.weights) {
                acc.axpy(w, &u.layers[pos].tensors[ti])?;
            }
            *t = acc;
        }
    }
    Ok(global)
}
