//! Dense-matrix model of the entangling circuit, built from Kronecker products.

use hqfl_core::quantum::{CnotSchedule, EntanglingLayerParams};
use num_complex::Complex64;
use rand::Rng;

pub type Matrix = Vec<Vec<Complex64>>;

pub fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

pub fn identity(dim: usize) -> Matrix {
    (0..dim)
        .map(|i| (0..dim).map(|j| if i == j { c(1.0, 0.0) } else { c(0.0, 0.0) }).collect())
        .collect()
}

pub fn kron(a: &Matrix, b: &Matrix) -> Matrix {
    let (n, m) = (a.len(), b.len());
    let mut out = vec![vec![c(0.0, 0.0); n * m]; n * m];
    for i in 0..n {
        for j in 0..n {
            for k in 0..m {
                for l in 0..m {
                    out[i * m + k][j * m + l] = a[i][j] * b[k][l];
                }
            }
        }
    }
    out
}

pub fn matmul(a: &Matrix, b: &Matrix) -> Matrix {
    let n = a.len();
    let mut out = vec![vec![c(0.0, 0.0); n]; n];
    for i in 0..n {
        for k in 0..n {
            if a[i][k] == c(0.0, 0.0) {
                continue;
            }
            for j in 0..n {
                out[i][j] += a[i][k] * b[k][j];
            }
        }
    }
    out
}

pub fn ry(theta: f64) -> Matrix {
    let (s, co) = (theta / 2.0).sin_cos();
    vec![vec![c(co, 0.0), c(-s, 0.0)], vec![c(s, 0.0), c(co, 0.0)]]
}

pub fn rz(phi: f64) -> Matrix {
    vec![
        vec![Complex64::from_polar(1.0, -phi / 2.0), c(0.0, 0.0)],
        vec![c(0.0, 0.0), Complex64::from_polar(1.0, phi / 2.0)],
    ]
}

/// `gate` on `qubit` of an `n`-qubit register, qubit 0 most significant.
pub fn lift(gate: &Matrix, qubit: usize, n: usize) -> Matrix {
    let id2 = identity(2);
    let mut m = identity(1);
    for q in 0..n {
        m = kron(&m, if q == qubit { gate } else { &id2 });
    }
    m
}

pub fn cnot_matrix(control: usize, target: usize, n: usize) -> Matrix {
    let dim = 1 << n;
    let mut m = vec![vec![c(0.0, 0.0); dim]; dim];
    for i in 0..dim {
        let cbit = (i >> (n - 1 - control)) & 1;
        let j = if cbit == 1 { i ^ (1 << (n - 1 - target)) } else { i };
        m[j][i] = c(1.0, 0.0);
    }
    m
}

pub fn full_unitary(params: &EntanglingLayerParams, schedule: &CnotSchedule) -> Matrix {
    let n = params.n_qubits();
    let mut u = identity(1 << n);
    for l in 0..params.n_layers() {
        for q in 0..n {
            for gate in [rz(params.get(l, q, 0)), ry(params.get(l, q, 1)), rz(params.get(l, q, 2))] {
                u = matmul(&lift(&gate, q, n), &u);
            }
        }
        for &(ct, tg) in schedule.layer(l) {
            u = matmul(&cnot_matrix(ct, tg, n), &u);
        }
    }
    u
}

pub fn apply(u: &Matrix, x: &[Complex64]) -> Vec<Complex64> {
    u.iter().map(|row| row.iter().zip(x).map(|(a, b)| a * b).sum()).collect()
}

pub fn random_unit(rng: &mut impl Rng, dim: usize) -> Vec<f64> {
    let v: Vec<f64> = (0..dim).map(|_| rng.random_range(-1.0..1.0)).collect();
    let norm = v.iter().map(|a| a * a).sum::<f64>().sqrt();
    v.into_iter().map(|a| a / norm).collect()
}

/// `⟨Z_i⟩` as the quadratic form `x† U† Z_i U x`; valid for any `x`, unit or not.
pub fn z_quadratic(u: &Matrix, x: &[f64], n: usize) -> Vec<f64> {
    let ux = apply(u, &x.iter().map(|&a| c(a, 0.0)).collect::<Vec<_>>());
    (0..n)
        .map(|i| {
            ux.iter()
                .enumerate()
                .map(|(b, a)| if (b >> (n - 1 - i)) & 1 == 0 { a.norm_sqr() } else { -a.norm_sqr() })
                .sum()
        })
        .collect()
}
