//! Canonical-embedding encoder.
//!
//! Slot `j` holds the evaluation of the message polynomial at `ζ^{5^j}`, where
//! `ζ = exp(iπ/N)`. The transforms below are the O(N log N) "special FFT" over
//! that rotation group; the real and imaginary halves of the inverse transform
//! become coefficients `0..N/2` and `N/2..N` respectively.

use num_complex::Complex64;
use std::f64::consts::PI;

#[derive(Debug, Clone)]
pub(crate) struct Encoder {
    n: usize,
    rot_group: Vec<usize>,
    ksi_pows: Vec<Complex64>,
}

impl Encoder {
    pub(crate) fn new(n: usize) -> Self {
        let m = 2 * n;
        let slots = n / 2;
        let mut rot_group = Vec::with_capacity(slots);
        let mut five_pow = 1usize;
        for _ in 0..slots {
            rot_group.push(five_pow);
            five_pow = five_pow * 5 % m;
        }
        let ksi_pows = (0..=m)
            .map(|j| Complex64::from_polar(1.0, 2.0 * PI * (j % m) as f64 / m as f64))
            .collect();
        Self {
            n,
            rot_group,
            ksi_pows,
        }
    }

    pub(crate) fn slots(&self) -> usize {
        self.n / 2
    }

    /// Real polynomial coefficients whose embedding equals `values` (zero padded).
    pub(crate) fn coefficients_for(&self, values: &[f64]) -> Vec<f64> {
        let slots = self.slots();
        let mut u: Vec<Complex64> = (0..slots)
            .map(|i| Complex64::new(values.get(i).copied().unwrap_or(0.0), 0.0))
            .collect();
        self.special_fft_inv(&mut u);
        let mut coeffs = vec![0.0; self.n];
        for (i, z) in u.iter().enumerate() {
            coeffs[i] = z.re;
            coeffs[i + slots] = z.im;
        }
        coeffs
    }

    /// Slot values of a polynomial with real coefficients.
    pub(crate) fn slots_of(&self, coeffs: &[f64]) -> Vec<Complex64> {
        let slots = self.slots();
        let mut u: Vec<Complex64> = (0..slots)
            .map(|i| Complex64::new(coeffs[i], coeffs[i + slots]))
            .collect();
        self.special_fft(&mut u);
        u
    }

    fn special_fft(&self, vals: &mut [Complex64]) {
        let size = vals.len();
        let m = 2 * self.n;
        bit_reverse(vals);
        let mut len = 2;
        while len <= size {
            let lenh = len / 2;
            let lenq = len * 4;
            for i in (0..size).step_by(len) {
                for j in 0..lenh {
                    let idx = (self.rot_group[j] % lenq) * m / lenq;
                    let u = vals[i + j];
                    let v = vals[i + j + lenh] * self.ksi_pows[idx];
                    vals[i + j] = u + v;
                    vals[i + j + lenh] = u - v;
                }
            }
            len <<= 1;
        }
    }

    fn special_fft_inv(&self, vals: &mut [Complex64]) {
        let size = vals.len();
        let m = 2 * self.n;
        let mut len = size;
        while len >= 2 {
            let lenh = len / 2;
            let lenq = len * 4;
            for i in (0..size).step_by(len) {
                for j in 0..lenh {
                    let idx = (lenq - self.rot_group[j] % lenq) * m / lenq;
                    let u = vals[i + j] + vals[i + j + lenh];
                    let v = (vals[i + j] - vals[i + j + lenh]) * self.ksi_pows[idx];
                    vals[i + j] = u;
                    vals[i + j + lenh] = v;
                }
            }
            len >>= 1;
        }
        bit_reverse(vals);
        let inv = 1.0 / size as f64;
        for v in vals.iter_mut() {
            *v *= inv;
        }
    }
}

fn bit_reverse(vals: &mut [Complex64]) {
    let n = vals.len();
    if n <= 1 {
        return;
    }
    let bits = n.trailing_zeros();
    for i in 0..n {
        let j = i.reverse_bits() >> (usize::BITS - bits);
        if i < j {
            vals.swap(i, j);
        }
    }
}
