//! The round loop: select, train, privatize, encrypt, aggregate, freeze,
//! evaluate.

use std::time::Instant;

use hqfl_ckks::{CkksContext, KeyPair};
use rand::seq::index::sample;
use rayon::prelude::*;

use super::client::{run_client, ClientData, RoundContext};
use super::config::{DatasetKind, FederationConfig};
use super::partition::dirichlet_partition;
use crate::aggregation::{aggregate, compute_weights, FreezeState};
use crate::data::{load_cifar10, load_fashion_mnist, synthetic, Dataset, Split};
use crate::dp::PrivacyAccountant;
use crate::error::{config_err, Error, Result};
use crate::hybrid::{HybridModel, LayeredParameters};
use crate::nn::{argmax, softmax_cross_entropy};
use crate::rng::{stream, Purpose};
use crate::update::ClientUpdate;

/// One row of the per-round record.
#[derive(Debug, Clone, PartialEq)]
pub struct RoundMetrics {
    pub round: u32,
    pub test_loss: f64,
    pub test_accuracy: f64,
    pub selected: Vec<u32>,
    pub privatized_accuracies: Vec<f64>,
    pub weights: Vec<f64>,
    /// `|D_i| / Σ|D_j|` over the selected clients, for comparison only.
    pub sample_weights: Vec<f64>,
    /// Layers frozen while this round trained.
    pub frozen_layers: Vec<String>,
    /// Layers the server froze at the end of this round.
    pub newly_frozen: Vec<String>,
    /// Parameters each selected client sent (plaintext plus encrypted).
    pub params_per_client: usize,
    pub transmitted_params: usize,
    pub transmitted_ciphertexts: usize,
    pub transmitted_bytes: usize,
    pub epsilon_total: f64,
    pub duration_ms: f64,
}

/// Loads the configured dataset, truncated to `max_train` / `max_test`.
pub fn load_dataset(config: &FederationConfig) -> Result<Split> {
    let d = &config.dataset;
    let mut split = match d.kind {
        DatasetKind::Synthetic => synthetic(&d.synthetic, config.federation.seed)?,
        DatasetKind::Cifar10 => load_cifar10(d.path.as_deref().ok_or_else(|| config_err!("dataset path missing"))?)?,
        DatasetKind::FashionMnist => {
            load_fashion_mnist(d.path.as_deref().ok_or_else(|| config_err!("dataset path missing"))?)?
        }
    };
    if let Some(n) = d.max_train {
        split.train.truncate(n);
    }
    if let Some(n) = d.max_test {
        split.test.truncate(n);
    }
    Ok(split)
}

/// Mean cross-entropy and top-1 accuracy over `test`.
pub fn evaluate_global(model: &HybridModel, params: &LayeredParameters, test: &Dataset) -> Result<(f64, f64)> {
    if test.is_empty() {
        return Err(Error::Input("empty test set".into()));
    }
    let per_sample: Vec<(f64, bool)> = test
        .images()
        .par_iter()
        .zip(test.labels().par_iter())
        .map(|(x, &y)| {
            let logits = model.logits(x, params)?;
            let (loss, _) = softmax_cross_entropy(&logits, y)?;
            Ok((loss, argmax(logits.data()) == y))
        })
        .collect::<Result<_>>()?;
    let loss = per_sample.iter().map(|p| p.0).sum::<f64>() / test.len() as f64;
    let correct = per_sample.iter().filter(|p| p.1).count();
    Ok((loss, correct as f64 / test.len() as f64))
}

pub struct Federation {
    config: FederationConfig,
    model: HybridModel,
    partition: Vec<Vec<usize>>,
    clients: Vec<ClientData>,
    test: Dataset,
    dataset_checksum: String,
    global: LayeredParameters,
    freeze: FreezeState,
    accountant: PrivacyAccountant,
    he: CkksContext,
    keys: KeyPair,
    round: u32,
    history: Vec<RoundMetrics>,
}

impl Federation {
    /// Validates `config` and loads its dataset.
    pub fn new(config: FederationConfig) -> Result<Self> {
        config
            .validate()
            .map_err(|(s, k, m)| Error::Config(format!("[{s}] {k}: {m}")))?;
        let split = load_dataset(&config)?;
        Self::with_data(config, split)
    }

    /// Like [`Federation::new`] but on an already loaded dataset.
    pub fn with_data(config: FederationConfig, split: Split) -> Result<Self> {
        config
            .validate()
            .map_err(|(s, k, m)| Error::Config(format!("[{s}] {k}: {m}")))?;
        if split.train.n_classes() != config.model.n_classes {
            return Err(config_err!(
                "model has {} classes, dataset has {}",
                config.model.n_classes,
                split.train.n_classes()
            ));
        }
        if split.test.is_empty() {
            return Err(config_err!("test set is empty"));
        }
        let seed = config.federation.seed;
        let model = HybridModel::new(config.model.clone(), split.train.shape())?;
        let dataset_checksum = split.train.checksum();

        let partition = dirichlet_partition(
            split.train.labels(),
            config.federation.n_clients,
            config.federation.dirichlet_alpha,
            &mut stream(seed, Purpose::Partition, 0, 0),
        )?;
        let clients: Vec<ClientData> = partition
            .iter()
            .enumerate()
            .map(|(i, idx)| {
                let mut rng = stream(seed, Purpose::Split, i as u64, 0);
                ClientData::split(i as u32, &split.train.subset(idx), config.training.validation_fraction, &mut rng)
            })
            .collect();

        let global = model.init(&mut stream(seed, Purpose::Init, 0, 0));
        let freeze = FreezeState::new(&global, config.freezing.threshold, config.freezing.ema_alpha)?;
        let accountant = PrivacyAccountant::new(config.privacy.epsilon, config.privacy.delta, config.privacy.budget)?;
        let he = CkksContext::new(config.he.params())?;
        if global.layers()[global.classifier_index()].param_count() > he.slot_count() {
            return Err(config_err!(
                "classifier has {} parameters but a ciphertext holds {} slots",
                global.layers()[global.classifier_index()].param_count(),
                he.slot_count()
            ));
        }
        let keys = he.keygen(&mut stream(seed, Purpose::Keygen, 0, 0));
        log::info!(
            "{} clients, {} training samples, {} parameters",
            clients.len(),
            split.train.len(),
            global.param_count()
        );
        Ok(Self {
            config,
            model,
            partition,
            clients,
            test: split.test,
            dataset_checksum,
            global,
            freeze,
            accountant,
            he,
            keys,
            round: 0,
            history: Vec::new(),
        })
    }

    pub fn config(&self) -> &FederationConfig {
        &self.config
    }

    pub fn model(&self) -> &HybridModel {
        &self.model
    }

    pub fn global(&self) -> &LayeredParameters {
        &self.global
    }

    pub fn freeze_state(&self) -> &FreezeState {
        &self.freeze
    }

    pub fn partition(&self) -> &[Vec<usize>] {
        &self.partition
    }

    pub fn clients(&self) -> &[ClientData] {
        &self.clients
    }

    pub fn test_set(&self) -> &Dataset {
        &self.test
    }

    pub fn dataset_checksum(&self) -> &str {
        &self.dataset_checksum
    }

    pub fn he(&self) -> &CkksContext {
        &self.he
    }

    pub fn rounds_done(&self) -> u32 {
        self.round
    }

    pub fn history(&self) -> &[RoundMetrics] {
        &self.history
    }

    /// `⌈fraction · N⌉` distinct clients, in ascending order.
    fn select(&self, round: u32) -> Vec<usize> {
        let n = self.clients.len();
        let k = ((self.config.federation.client_fraction * n as f64).ceil() as usize).clamp(1, n);
        let mut rng = stream(self.config.federation.seed, Purpose::Selection, 0, round as u64);
        let mut chosen = sample(&mut rng, n, k).into_vec();
        chosen.sort_unstable();
        chosen
    }

    pub fn run_round(&mut self) -> Result<RoundMetrics> {
        let start = Instant::now();
        let round = self.round + 1;
        let selected = self.select(round);
        let frozen_before = self.freeze.frozen().to_vec();
        let ctx = RoundContext {
            model: &self.model,
            global: &self.global,
            frozen: &frozen_before,
            training: &self.config.training,
            epsilon: self.config.privacy.epsilon,
            he: &self.he,
            server_key: &self.keys.public,
            seed: self.config.federation.seed,
            round,
        };
        let wire: Vec<Vec<u8>> = selected
            .par_iter()
            .map(|&i| run_client(&self.clients[i], &ctx))
            .collect::<Result<_>>()?;

        // server side: only bytes cross the boundary
        let updates: Vec<ClientUpdate> = wire
            .iter()
            .map(|b| ClientUpdate::from_bytes(&self.he, b))
            .collect::<Result<_>>()?;
        let privatized: Vec<f64> = updates.iter().map(|u| u.accuracy.value()).collect();
        let weights = compute_weights(&privatized, self.config.aggregation.tau)?;
        let next = aggregate(&updates, &weights, &self.freeze, &self.global, &self.he, &self.keys.secret)?;
        self.freeze.observe(&self.global, &next)?;
        let newly = self.freeze.apply_mask();
        self.global = next;

        let (test_loss, test_accuracy) = evaluate_global(&self.model, &self.global, &self.test)?;
        let epsilon_total = self.accountant.record_round();

        let train_total: u64 = updates.iter().map(|u| u.train_size as u64).sum();
        let sample_weights = updates
            .iter()
            .map(|u| if train_total == 0 { 0.0 } else { u.train_size as f64 / train_total as f64 })
            .collect();
        let sent: Vec<usize> = updates
            .iter()
            .map(|u| {
                let enc = if u.classifier.is_some() {
                    self.global.layers()[self.global.classifier_index()].param_count()
                } else {
                    0
                };
                u.plaintext_params() + enc
            })
            .collect();
        let names = self.global.names();
        let metrics = RoundMetrics {
            round,
            test_loss,
            test_accuracy,
            selected: selected.iter().map(|&i| i as u32).collect(),
            privatized_accuracies: privatized,
            weights: weights.weights,
            sample_weights,
            frozen_layers: names
                .iter()
                .zip(&frozen_before)
                .filter(|(_, &f)| f)
                .map(|(n, _)| n.to_string())
                .collect(),
            newly_frozen: newly.iter().map(|&i| names[i].to_string()).collect(),
            params_per_client: sent[0],
            transmitted_params: sent.iter().sum(),
            transmitted_ciphertexts: updates.iter().filter(|u| u.classifier.is_some()).count(),
            transmitted_bytes: wire.iter().map(Vec::len).sum(),
            epsilon_total,
            duration_ms: start.elapsed().as_secs_f64() * 1e3,
        };
        log::info!(
            "round {round}: loss {test_loss:.4}, accuracy {test_accuracy:.4}, {} bytes sent, frozen {:?}",
            metrics.transmitted_bytes,
            self.freeze.frozen_names()
        );
        self.round = round;
        self.history.push(metrics.clone());
        Ok(metrics)
    }

    /// Runs the remaining configured rounds, calling `progress` after each.
    pub fn run_with(&mut self, mut progress: impl FnMut(&RoundMetrics)) -> Result<Vec<RoundMetrics>> {
        while self.round < self.config.federation.rounds {
            let m = self.run_round()?;
            progress(&m);
        }
        Ok(self.history.clone())
    }

    pub fn run(&mut self) -> Result<Vec<RoundMetrics>> {
        self.run_with(|_| {})
    }
}

/// Builds a federation from `config` and runs every round.
pub fn run_federation(config: FederationConfig) -> Result<Vec<RoundMetrics>> {
    Federation::new(config)?.run()
}
