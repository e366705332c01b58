//! Helpers shared by the integration tests.
#![allow(dead_code)]

pub mod unitary;

use std::path::PathBuf;

use hqfl_core::federation::FederationConfig;
use rand::Rng;

pub fn toy_config() -> FederationConfig {
    let path = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../configs/toy.toml");
    FederationConfig::from_path(&path).expect("toy preset parses")
}

/// Standard normal by Box–Muller.
fn std_normal(rng: &mut impl Rng) -> f64 {
    let u1: f64 = 1.0 - rng.random::<f64>();
    let u2: f64 = rng.random::<f64>();
    (-2.0 * u1.ln()).sqrt() * (2.0 * std::f64::consts::PI * u2).cos()
}

/// Gamma(shape, 1) by Marsaglia–Tsang, boosted by `U^(1/shape)` below one.
pub fn gamma(shape: f64, rng: &mut impl Rng) -> f64 {
    if shape < 1.0 {
        let u: f64 = 1.0 - rng.random::<f64>();
        return gamma(shape + 1.0, rng) * u.powf(1.0 / shape);
    }
    let d = shape - 1.0 / 3.0;
    let c = 1.0 / (9.0 * d).sqrt();
    loop {
        let x = std_normal(rng);
        let v = (1.0 + c * x).powi(3);
        if v <= 0.0 {
            continue;
        }
        let u: f64 = 1.0 - rng.random::<f64>();
        if u.ln() < 0.5 * x * x + d - d * v + d * v.ln() {
            return d * v;
        }
    }
}

pub fn reference_dirichlet(alpha: f64, n: usize, rng: &mut impl Rng) -> Vec<f64> {
    let g: Vec<f64> = (0..n).map(|_| gamma(alpha, rng)).collect();
    let s: f64 = g.iter().sum();
    if s > 0.0 {
        g.iter().map(|x| x / s).collect()
    } else {
        let mut p = vec![0.0; n];
        p[rng.random_range(0..n)] = 1.0;
        p
    }
}

/// Per-class Dirichlet allocation: each class is split at the floors of the
/// cumulative proportions. Returns a per-client class histogram.
pub fn reference_partition_counts(class_sizes: &[usize], n_clients: usize, alpha: f64, rng: &mut impl Rng) -> Vec<Vec<usize>> {
    let mut counts = vec![vec![0usize; class_sizes.len()]; n_clients];
    for (c, &total) in class_sizes.iter().enumerate() {
        let p = reference_dirichlet(alpha, n_clients, rng);
        let mut start = 0usize;
        let mut cum = 0.0;
        for k in 0..n_clients {
            cum += p[k];
            let end = if k + 1 == n_clients {
                total
            } else {
                ((cum * total as f64).floor() as usize).clamp(start, total)
            };
            counts[k][c] = end - start;
            start = end;
        }
    }
    counts
}

pub fn entropy(counts: &[usize]) -> f64 {
    let n: usize = counts.iter().sum();
    if n == 0 {
        return 0.0;
    }
    let mut h = 0.0;
    for &c in counts {
        if c > 0 {
            let p = c as f64 / n as f64;
            h -= p * p.ln();
        }
    }
    h
}

pub fn mean_entropy(hists: &[Vec<usize>]) -> f64 {
    hists.iter().map(|h| entropy(h)).sum::<f64>() / hists.len() as f64
}

/// Drops the `duration_ms` column from a metrics CSV.
pub fn strip_timing(csv: &str) -> String {
    let header = csv.lines().next().unwrap_or("");
    let col = header.split(',').position(|h| h == "duration_ms").expect("timing column");
    csv.lines()
        .map(|l| {
            let mut f: Vec<&str> = l.split(',').collect();
            f.remove(col);
            f.join(",")
        })
        .collect::<Vec<_>>()
        .join("\n")
}
