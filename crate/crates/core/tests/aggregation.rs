//! Server aggregation: encrypted path against an all-plaintext weighted sum,
//! weight invariants, freezing rules and protocol checks.

use hqfl_ckks::{CkksContext, HeParams, KeyPair};
use hqfl_core::aggregation::{aggregate, compute_weights, freeze_mask, FreezeState};
use hqfl_core::dp::PrivatizedAccuracy;
use hqfl_core::hybrid::{HybridModel, LayerKind, LayeredParameters, ModelConfig};
use hqfl_core::update::{ClientUpdate, NamedTensors};
use hqfl_core::Error;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;

fn model() -> HybridModel {
    let cfg = ModelConfig {
        conv_channels: vec![2],
        hidden: vec![],
        n_classes: 10,
        ..ModelConfig::default()
    };
    HybridModel::new(cfg, [1, 4, 4]).unwrap()
}

fn perturbed(base: &LayeredParameters, rng: &mut impl Rng) -> LayeredParameters {
    let mut p = base.clone();
    for layer in p.layers_mut() {
        for t in &mut layer.tensors {
            for v in t.data_mut() {
                *v = rng.random_range(-1.0..1.0);
            }
        }
    }
    p
}

fn to_update(
    id: u32,
    params: &LayeredParameters,
    frozen: &[bool],
    ctx: &CkksContext,
    keys: &KeyPair,
    rng: &mut ChaCha20Rng,
) -> ClientUpdate {
    let mut layers = Vec::new();
    let mut classifier = None;
    for (i, l) in params.layers().iter().enumerate() {
        if frozen[i] {
            continue;
        }
        if l.kind == LayerKind::FinalClassifier {
            classifier = Some(ctx.encrypt_values(&l.flatten(), &keys.public, rng).unwrap());
        } else {
            layers.push(NamedTensors {
                name: l.name.clone(),
                tensors: l.tensors.clone(),
            });
        }
    }
    ClientUpdate {
        client_id: id,
        round: 1,
        layers,
        classifier,
        accuracy: PrivatizedAccuracy::from_parts(0.5, 10, id, 1).unwrap(),
        validation_size: 10,
        train_size: 90,
    }
}

/// `Σ_i w_i θ_i` computed coordinate by coordinate on flattened layers.
fn plaintext_oracle(locals: &[LayeredParameters], weights: &[f64], layer: usize) -> Vec<f64> {
    let n = locals[0].layers()[layer].param_count();
    (0..n)
        .map(|k| {
            locals
                .iter()
                .zip(weights)
                .map(|(p, w)| w * p.layers()[layer].flatten()[k])
                .sum()
        })
        .collect()
}

#[test]
fn encrypted_aggregation_matches_plaintext() {
    let m = model();
    let mut rng = ChaCha20Rng::seed_from_u64(41);
    let global = m.init(&mut rng);
    let ctx = CkksContext::new(HeParams::desk()).unwrap();
    let keys = ctx.keygen(&mut rng);
    let frozen = vec![false; global.len()];
    let locals: Vec<LayeredParameters> = (0..10).map(|_| perturbed(&global, &mut rng)).collect();
    let updates: Vec<ClientUpdate> = locals
        .iter()
        .enumerate()
        .map(|(i, p)| to_update(i as u32, p, &frozen, &ctx, &keys, &mut rng))
        .collect();
    let accs: Vec<f64> = (0..10).map(|_| rng.random_range(0.0..1.0)).collect();
    let weights = compute_weights(&accs, 0.5).unwrap();
    let freeze = FreezeState::new(&global, 0.001, 0.9).unwrap();
    let out = aggregate(&updates, &weights, &freeze, &global, &ctx, &keys.secret).unwrap();

    for (li, layer) in out.layers().iter().enumerate() {
        let want = plaintext_oracle(&locals, &weights.weights, li);
        let tol = if layer.kind == LayerKind::FinalClassifier { 1e-3 } else { 1e-12 };
        for (a, b) in layer.flatten().iter().zip(&want) {
            assert!((a - b).abs() < tol, "{}: {a} vs {b}", layer.name);
        }
    }
}

#[test]
fn frozen_layers_come_from_previous_global() {
    let m = model();
    let mut rng = ChaCha20Rng::seed_from_u64(42);
    let global = m.init(&mut rng);
    let ctx = CkksContext::new(HeParams::desk()).unwrap();
    let keys = ctx.keygen(&mut rng);
    // freeze everything classical (threshold above any score), including the classifier
    let mut freeze = FreezeState::new(&global, f64::INFINITY, 0.9).unwrap();
    freeze.observe(&global, &global).unwrap();
    freeze.apply_mask();
    let q = global.quantum_index();
    assert!(!freeze.is_frozen(q));
    assert!((0..global.len()).filter(|&i| i != q).all(|i| freeze.is_frozen(i)));

    let locals: Vec<LayeredParameters> = (0..3).map(|_| perturbed(&global, &mut rng)).collect();
    let updates: Vec<ClientUpdate> = locals
        .iter()
        .enumerate()
        .map(|(i, p)| to_update(i as u32, p, freeze.frozen(), &ctx, &keys, &mut rng))
        .collect();
    assert!(updates.iter().all(|u| u.classifier.is_none() && u.layers.len() == 1));
    let weights = compute_weights(&[0.2, 0.5, 0.9], 0.5).unwrap();
    let out = aggregate(&updates, &weights, &freeze, &global, &ctx, &keys.secret).unwrap();
    for (i, (a, b)) in out.layers().iter().zip(global.layers()).enumerate() {
        if i == q {
            assert_ne!(a, b);
        } else {
            assert_eq!(a, b);
        }
    }
}

#[test]
fn protocol_violations_rejected() {
    let m = model();
    let mut rng = ChaCha20Rng::seed_from_u64(43);
    let global = m.init(&mut rng);
    let ctx = CkksContext::new(HeParams::desk()).unwrap();
    let keys = ctx.keygen(&mut rng);
    let frozen = vec![false; global.len()];
    let freeze = FreezeState::new(&global, 0.001, 0.9).unwrap();
    let good = to_update(0, &global, &frozen, &ctx, &keys, &mut rng);
    let w = compute_weights(&[0.5], 0.5).unwrap();
    let run = |u: ClientUpdate| aggregate(&[u], &w, &freeze, &global, &ctx, &keys.secret);

    let mut missing = good.clone();
    missing.layers.pop();
    assert!(matches!(run(missing), Err(Error::Protocol(_))));

    let mut no_ct = good.clone();
    no_ct.classifier = None;
    assert!(matches!(run(no_ct), Err(Error::Protocol(_))));

    let mut bad_shape = good.clone();
    bad_shape.layers[0].tensors[1] = hqfl_core::Tensor::zeros(&[99]);
    assert!(matches!(run(bad_shape), Err(Error::Protocol(_))));

    assert!(run(good).is_ok());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1000))]

    #[test]
    fn weights_on_simplex_and_monotone(
        accs in proptest::collection::vec(0.0f64..=1.0, 1..20),
        tau in 0.01f64..5.0,
    ) {
        let w = compute_weights(&accs, tau).unwrap().weights;
        prop_assert!((w.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        prop_assert!(w.iter().all(|&x| x > 0.0));
        for i in 0..accs.len() {
            for j in 0..accs.len() {
                if accs[i] > accs[j] {
                    prop_assert!(w[i] >= w[j]);
                }
                if accs[i] == accs[j] {
                    prop_assert_eq!(w[i], w[j]);
                }
            }
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn freezing_is_monotone_and_spares_quantum(
        seed in any::<u64>(),
        scales in proptest::collection::vec(0.0f64..0.01, 1..8),
        threshold in 0.0f64..0.01,
    ) {
        let m = model();
        let mut rng = ChaCha20Rng::seed_from_u64(seed);
        let mut prev = m.init(&mut rng);
        let mut state = FreezeState::new(&prev, threshold, 0.9).unwrap();
        let mut flags = state.frozen().to_vec();
        for s in scales {
            let mut next = prev.clone();
            for layer in next.layers_mut() {
                for t in &mut layer.tensors {
                    for v in t.data_mut() {
                        *v += rng.random_range(-s..=s);
                    }
                }
            }
            state.observe(&prev, &next).unwrap();
            let recomputed = freeze_mask(&state);
            state.apply_mask();
            prop_assert_eq!(recomputed.frozen(), state.frozen());
            prop_assert!(!state.is_frozen(prev.quantum_index()));
            for (i, (&before, &after)) in flags.iter().zip(state.frozen()).enumerate() {
                prop_assert!(!before || after, "layer {} unfroze", i);
                let below = state.ema()[i].is_some_and(|e| e < threshold);
                if prev.layers()[i].kind != LayerKind::Quantum && below {
                    prop_assert!(after);
                }
            }
            flags = state.frozen().to_vec();
            prev = next;
        }
    }
}
