//! One client's round: local Adam training from the global model, held-out
//! validation, accuracy privatization and classifier encryption.

use hqfl_ckks::{CkksContext, PublicKey};
use rand::seq::SliceRandom;
use rand::Rng;

use super::config::TrainingSection;
use crate::data::Dataset;
use crate::dp::privatize_accuracy;
use crate::error::Result;
use crate::hybrid::{HybridModel, LayerKind, LayeredParameters};
use crate::nn::{argmax, AdamState};
use crate::rng::{stream, Purpose};
use crate::tensor::Tensor;
use crate::update::{ClientUpdate, NamedTensors};

#[derive(Debug, Clone)]
pub struct ClientData {
    pub id: u32,
    pub train: Dataset,
    pub validation: Dataset,
}

impl ClientData {
    /// Shuffles `data` and holds out `round(fraction·n)` samples (at least
    /// one when `n ≥ 2`) for validation.
    pub fn split<R: Rng + ?Sized>(id: u32, data: &Dataset, fraction: f64, rng: &mut R) -> Self {
        let n = data.len();
        let mut idx: Vec<usize> = (0..n).collect();
        idx.shuffle(rng);
        let m = if n < 2 {
            0
        } else {
            ((fraction * n as f64).round() as usize).clamp(1, n - 1)
        };
        Self {
            id,
            validation: data.subset(&idx[..m]),
            train: data.subset(&idx[m..]),
        }
    }
}

#[derive(Debug, Clone)]
pub struct LocalResult {
    pub params: LayeredParameters,
    /// Raw accuracy: only ever passed to the privatizer.
    accuracy: f64,
    pub evaluated_on: u32,
    pub train_size: u32,
}

pub fn accuracy(model: &HybridModel, params: &LayeredParameters, data: &Dataset) -> Result<f64> {
    if data.is_empty() {
        return Ok(0.0);
    }
    let mut correct = 0usize;
    for (x, &y) in data.images().iter().zip(data.labels()) {
        if argmax(model.logits(x, params)?.data()) == y {
            correct += 1;
        }
    }
    Ok(correct as f64 / data.len() as f64)
}

/// `local_epochs` of mini-batch Adam from `global`, skipping frozen layers.
/// Optimizer moments start fresh each round.
pub fn local_train<R: Rng + ?Sized>(
    model: &HybridModel,
    client: &ClientData,
    global: &LayeredParameters,
    frozen: &[bool],
    cfg: &TrainingSection,
    rng: &mut R,
) -> Result<LocalResult> {
    let mut params = global.clone();
    let mut adam: Vec<Vec<AdamState>> = params
        .layers()
        .iter()
        .map(|l| l.tensors.iter().map(|t| AdamState::new(t.shape())).collect())
        .collect();
    let n = client.train.len();
    let mut order: Vec<usize> = (0..n).collect();
    for _ in 0..cfg.local_epochs {
        order.shuffle(rng);
        for batch in order.chunks(cfg.batch_size) {
            let images: Vec<&Tensor> = batch.iter().map(|&i| &client.train.images()[i]).collect();
            let labels: Vec<usize> = batch.iter().map(|&i| client.train.labels()[i]).collect();
            let (_, grads) = model.loss_and_grads(&images, &labels, &params)?;
            for (li, layer) in params.layers_mut().iter_mut().enumerate() {
                if frozen[li] {
                    continue;
                }
                for (ti, t) in layer.tensors.iter_mut().enumerate() {
                    adam[li][ti].update(t, &grads.layers()[li].tensors[ti], cfg.learning_rate);
                }
            }
        }
    }
    let (acc, evaluated_on) = if client.validation.is_empty() {
        log::warn!("client {} has no validation samples; reporting training accuracy", client.id);
        (accuracy(model, &params, &client.train)?, n)
    } else {
        (accuracy(model, &params, &client.validation)?, client.validation.len())
    };
    Ok(LocalResult {
        params,
        accuracy: acc,
        evaluated_on: evaluated_on.max(1) as u32,
        train_size: n as u32,
    })
}

/// Everything a client needs to run its part of one round.
pub struct RoundContext<'a> {
    pub model: &'a HybridModel,
    pub global: &'a LayeredParameters,
    pub frozen: &'a [bool],
    pub training: &'a TrainingSection,
    pub epsilon: f64,
    pub he: &'a CkksContext,
    pub server_key: &'a PublicKey,
    pub seed: u64,
    pub round: u32,
}

/// Trains, privatizes and encrypts; returns the serialized update.
pub fn run_client(client: &ClientData, ctx: &RoundContext<'_>) -> Result<Vec<u8>> {
    let id = client.id as u64;
    let round = ctx.round as u64;
    let mut train_rng = stream(ctx.seed, Purpose::Training, id, round);
    let local = local_train(ctx.model, client, ctx.global, ctx.frozen, ctx.training, &mut train_rng)?;
    let mut dp_rng = stream(ctx.seed, Purpose::Privacy, id, round);
    let privatized = privatize_accuracy(local.accuracy, local.evaluated_on, ctx.epsilon, client.id, ctx.round, &mut dp_rng)?;

    let mut layers = Vec::new();
    let mut classifier = None;
    for (i, layer) in local.params.layers().iter().enumerate() {
        if ctx.frozen[i] {
            continue;
        }
        if layer.kind == LayerKind::FinalClassifier {
            let mut enc_rng = stream(ctx.seed, Purpose::Encryption, id, round);
            classifier = Some(ctx.he.encrypt_values(&layer.flatten(), ctx.server_key, &mut enc_rng)?);
        } else {
            layers.push(NamedTensors {
                name: layer.name.clone(),
                tensors: layer.tensors.clone(),
            });
        }
    }
    let update = ClientUpdate {
        client_id: client.id,
        round: ctx.round,
        layers,
        classifier,
        accuracy: privatized,
        validation_size: local.evaluated_on,
        train_size: local.train_size,
    };
    Ok(update.to_bytes(ctx.he))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{synthetic, SyntheticSpec};
    use crate::hybrid::ModelConfig;
    use rand::SeedableRng;
    use rand_chacha::ChaCha20Rng;

    fn setup() -> (HybridModel, ClientData, LayeredParameters) {
        let spec = SyntheticSpec {
            train: 40,
            test: 4,
            ..SyntheticSpec::default()
        };
        let data = synthetic(&spec, 1).unwrap().train;
        let cfg = ModelConfig {
            conv_channels: vec![2],
            hidden: vec![],
            n_classes: 2,
            ..ModelConfig::default()
        };
        let model = HybridModel::new(cfg, [1, 8, 8]).unwrap();
        let params = model.init(&mut ChaCha20Rng::seed_from_u64(0));
        let client = ClientData::split(0, &data, 0.1, &mut ChaCha20Rng::seed_from_u64(1));
        (model, client, params)
    }

    #[test]
    fn split_sizes() {
        let (_, client, _) = setup();
        assert_eq!(client.validation.len(), 4);
        assert_eq!(client.train.len(), 36);
    }

    #[test]
    fn zero_epochs_is_identity() {
        let (model, client, params) = setup();
        let cfg = TrainingSection {
            local_epochs: 0,
            ..TrainingSection::default()
        };
        let frozen = vec![false; params.len()];
        let r = local_train(&model, &client, &params, &frozen, &cfg, &mut ChaCha20Rng::seed_from_u64(2)).unwrap();
        assert_eq!(r.params, params);
        assert_eq!(r.evaluated_on, 4);
        assert!([0.0, 0.25, 0.5, 0.75, 1.0].contains(&r.accuracy));
    }

    #[test]
    fn frozen_layers_untouched() {
        let (model, client, params) = setup();
        let cfg = TrainingSection {
            local_epochs: 1,
            batch_size: 8,
            ..TrainingSection::default()
        };
        let mut frozen = vec![false; params.len()];
        frozen[0] = true;
        let r = local_train(&model, &client, &params, &frozen, &cfg, &mut ChaCha20Rng::seed_from_u64(2)).unwrap();
        assert_eq!(r.params.layers()[0], params.layers()[0]);
        assert_ne!(r.params.layers()[1], params.layers()[1]);
    }

    #[test]
    fn empty_validation_falls_back() {
        let (model, mut client, params) = setup();
        client.validation = client.validation.subset(&[]);
        let cfg = TrainingSection {
            local_epochs: 0,
            ..TrainingSection::default()
        };
        let frozen = vec![false; params.len()];
        let r = local_train(&model, &client, &params, &frozen, &cfg, &mut ChaCha20Rng::seed_from_u64(2)).unwrap();
        assert_eq!(r.evaluated_on, 36);
    }
}
