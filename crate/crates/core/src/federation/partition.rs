//! Label-skewed client partitions: per class, proportions drawn from a
//! symmetric Dirichlet decide how that class's samples are dealt out.

use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::{Distribution, Gamma};

use crate::error::{config_err, Result};

/// One proportion vector from `Dirichlet(alpha · 1_n)` via normalized gammas.
pub fn dirichlet<R: Rng + ?Sized>(alpha: f64, n: usize, rng: &mut R) -> Result<Vec<f64>> {
    let gamma = Gamma::new(alpha, 1.0).map_err(|e| config_err!("Dirichlet alpha {alpha}: {e}"))?;
    let draws: Vec<f64> = (0..n).map(|_| gamma.sample(rng)).collect();
    let sum: f64 = draws.iter().sum();
    if sum > 0.0 && sum.is_finite() {
        return Ok(draws.into_iter().map(|g| g / sum).collect());
    }
    // every gamma underflowed (tiny alpha): all mass on one client
    let mut p = vec![0.0; n];
    p[rng.random_range(0..n)] = 1.0;
    Ok(p)
}

/// Disjoint, covering index sets, one per client, each sorted and non-empty.
pub fn dirichlet_partition<R: Rng + ?Sized>(
    labels: &[usize],
    n_clients: usize,
    alpha: f64,
    rng: &mut R,
) -> Result<Vec<Vec<usize>>> {
    if n_clients == 0 {
        return Err(config_err!("need at least one client"));
    }
    if !(alpha > 0.0 && alpha.is_finite()) {
        return Err(config_err!("Dirichlet alpha must be positive, got {alpha}"));
    }
    if labels.len() < n_clients {
        return Err(config_err!(
            "dataset has {} samples, fewer than {n_clients} clients",
            labels.len()
        ));
    }
    let n_classes = labels.iter().max().map_or(0, |m| m + 1);
    let mut clients: Vec<Vec<usize>> = vec![Vec::new(); n_clients];
    for class in 0..n_classes {
        let mut idx: Vec<usize> = (0..labels.len()).filter(|&i| labels[i] == class).collect();
        if idx.is_empty() {
            continue;
        }
        idx.shuffle(rng);
        let p = dirichlet(alpha, n_clients, rng)?;
        let total = idx.len();
        let mut start = 0;
        let mut cum = 0.0;
        for (k, share) in p.iter().enumerate() {
            cum += share;
            let end = if k + 1 == n_clients {
                total
            } else {
                ((cum * total as f64).floor() as usize).clamp(start, total)
            };
            clients[k].extend_from_slice(&idx[start..end]);
            start = end;
        }
    }
    // give every empty client one sample from the currently largest client
    while let Some(empty) = clients.iter().position(Vec::is_empty) {
        let largest = (0..n_clients)
            .max_by(|&a, &b| clients[a].len().cmp(&clients[b].len()).then(b.cmp(&a)))
            .expect("n_clients > 0");
        let moved = clients[largest].pop().expect("total ≥ n_clients");
        clients[empty].push(moved);
    }
    for c in &mut clients {
        c.sort_unstable();
    }
    Ok(clients)
}

/// Shannon entropy (nats) of a label histogram.
pub fn class_entropy(counts: &[usize]) -> f64 {
    let total: usize = counts.iter().sum();
    if total == 0 {
        return 0.0;
    }
    counts
        .iter()
        .filter(|&&c| c > 0)
        .map(|&c| {
            let p = c as f64 / total as f64;
            -p * p.ln()
        })
        .fold(0.0, |a, x| a + x)
}

pub fn histogram(labels: &[usize], indices: &[usize], n_classes: usize) -> Vec<usize> {
    let mut h = vec![0; n_classes];
    for &i in indices {
        h[labels[i]] += 1;
    }
    h
}
