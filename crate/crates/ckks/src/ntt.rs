//! Negacyclic number-theoretic transform over a single word-sized prime.

use crate::arith::{add_mod, inv_mod, mul_mod, pow_mod, primitive_root, sub_mod};

/// Precomputed twiddles for `Z_p[X]/(X^n + 1)`.
#[derive(Debug, Clone)]
pub(crate) struct NttTable {
    pub(crate) p: u64,
    n: usize,
    psi_pows: Vec<u64>,
    psi_inv_scaled: Vec<u64>,
    omega_pows: Vec<u64>,
    omega_inv_pows: Vec<u64>,
}

impl NttTable {
    pub(crate) fn new(p: u64, n: usize) -> Self {
        assert!(n.is_power_of_two() && n >= 2);
        let psi = primitive_root(2 * n as u64, p);
        let psi_inv = inv_mod(psi, p);
        let omega = mul_mod(psi, psi, p);
        let omega_inv = inv_mod(omega, p);
        let n_inv = inv_mod(n as u64 % p, p);

        let powers = |g: u64, len: usize| {
            let mut v = Vec::with_capacity(len);
            let mut acc = 1u64;
            for _ in 0..len {
                v.push(acc);
                acc = mul_mod(acc, g, p);
            }
            v
        };
        let psi_pows = powers(psi, n);
        let psi_inv_scaled = powers(psi_inv, n)
            .into_iter()
            .map(|x| mul_mod(x, n_inv, p))
            .collect();
        debug_assert_eq!(pow_mod(psi, n as u64, p), p - 1);
        Self {
            p,
            n,
            psi_pows,
            psi_inv_scaled,
            omega_pows: powers(omega, n / 2),
            omega_inv_pows: powers(omega_inv, n / 2),
        }
    }

    pub(crate) fn forward(&self, a: &mut [u64]) {
        debug_assert_eq!(a.len(), self.n);
        for (x, &w) in a.iter_mut().zip(&self.psi_pows) {
            *x = mul_mod(*x, w, self.p);
        }
        self.cyclic(a, &self.omega_pows);
    }

    pub(crate) fn inverse(&self, a: &mut [u64]) {
        self.cyclic(a, &self.omega_inv_pows);
        for (x, &w) in a.iter_mut().zip(&self.psi_inv_scaled) {
            *x = mul_mod(*x, w, self.p);
        }
    }

    fn cyclic(&self, a: &mut [u64], twiddles: &[u64]) {
        let n = self.n;
        let p = self.p;
        let bits = n.trailing_zeros();
        for i in 0..n {
            let j = i.reverse_bits() >> (usize::BITS - bits);
            if i < j {
                a.swap(i, j);
            }
        }
        let mut len = 2;
        while len <= n {
            let half = len / 2;
            let stride = n / len;
            for start in (0..n).step_by(len) {
                for j in 0..half {
                    let w = twiddles[j * stride];
                    let u = a[start + j];
                    let v = mul_mod(a[start + j + half], w, p);
                    a[start + j] = add_mod(u, v, p);
                    a[start + j + half] = sub_mod(u, v, p);
                }
            }
            len <<= 1;
        }
    }
}
