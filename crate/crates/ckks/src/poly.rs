//! Arbitrary-precision polynomials in `Z[X]/(X^N + 1)` and their exact product.
//!
//! Coefficients are kept as centered `BigInt` residues. Products are computed
//! exactly over the integers with a multi-prime NTT followed by CRT
//! reconstruction, then reduced by the caller's modulus.

use num_bigint::{BigInt, Sign};
use num_traits::{ToPrimitive, Zero};

use crate::arith::{inv_mod, mul_mod, primes_below};
use crate::ntt::NttTable;

/// Bits of headroom guaranteed per auxiliary prime (primes exceed `2^61`).
const AUX_PRIME_BITS: u64 = 61;

/// Reduce `x` into the centered range `(-q/2, q/2]`.
pub(crate) fn center(x: &BigInt, q: &BigInt, half_q: &BigInt) -> BigInt {
    let mut r = x % q;
    if r.sign() == Sign::Minus {
        r += q;
    }
    if &r > half_q {
        r -= q;
    }
    r
}

/// `round(x / d)` for positive `d`, ties away from negative infinity.
pub(crate) fn round_div(x: &BigInt, d: &BigInt) -> BigInt {
    let num: BigInt = x * 2 + d;
    let den: BigInt = d * 2;
    floor_div(&num, &den)
}

fn floor_div(a: &BigInt, b: &BigInt) -> BigInt {
    let q = a / b;
    let r = a - &q * b;
    if !r.is_zero() && ((r.sign() == Sign::Minus) != (b.sign() == Sign::Minus)) {
        q - 1
    } else {
        q
    }
}

fn residue(x: &BigInt, p: u64) -> u64 {
    let r = (x.magnitude() % p).to_u64().expect("residue fits u64");
    if x.sign() == Sign::Minus && r != 0 {
        p - r
    } else {
        r
    }
}

fn max_bits(a: &[BigInt]) -> u64 {
    a.iter().map(|x| x.bits()).max().unwrap_or(0)
}

#[derive(Debug, Clone)]
struct CrtBasis {
    product: BigInt,
    half: BigInt,
    lifts: Vec<BigInt>,
}

impl CrtBasis {
    fn new(primes: &[u64]) -> Self {
        let product: BigInt = primes.iter().fold(BigInt::from(1u8), |acc, &p| acc * p);
        let lifts = primes
            .iter()
            .map(|&p| {
                let cofactor: BigInt = &product / p;
                let inv = inv_mod(residue(&cofactor, p), p);
                cofactor * inv
            })
            .collect();
        let half = &product >> 1;
        Self { product, half, lifts }
    }

    fn reconstruct(&self, residues: &[u64]) -> BigInt {
        let mut acc = BigInt::zero();
        for (lift, &r) in self.lifts.iter().zip(residues) {
            acc += lift * r;
        }
        center(&acc, &self.product, &self.half)
    }
}

/// Exact negacyclic multiplier for a fixed ring degree.
#[derive(Debug, Clone)]
pub(crate) struct PolyMultiplier {
    n: usize,
    tables: Vec<NttTable>,
    bases: Vec<CrtBasis>,
}

impl PolyMultiplier {
    /// Build a multiplier able to handle products of operands up to `operand_bits` each.
    pub(crate) fn new(n: usize, operand_bits: u64) -> Self {
        let needed = 2 * operand_bits + (n.trailing_zeros() as u64) + 2;
        let count = needed.div_ceil(AUX_PRIME_BITS) as usize;
        let primes = primes_below(62, 2 * n as u64, count, &[]);
        assert_eq!(primes.len(), count, "not enough auxiliary NTT primes");
        let tables = primes.iter().map(|&p| NttTable::new(p, n)).collect();
        let bases = (1..=count).map(|k| CrtBasis::new(&primes[..k])).collect();
        Self { n, tables, bases }
    }

    /// Exact product of two integer polynomials modulo `X^N + 1`.
    pub(crate) fn mul(&self, a: &[BigInt], b: &[BigInt]) -> Vec<BigInt> {
        assert_eq!(a.len(), self.n);
        assert_eq!(b.len(), self.n);
        let needed = max_bits(a) + max_bits(b) + self.n.trailing_zeros() as u64 + 2;
        let k = (needed.div_ceil(AUX_PRIME_BITS) as usize).max(1);
        assert!(
            k <= self.tables.len(),
            "operands of {needed} product bits exceed multiplier capacity"
        );

        let per_prime: Vec<Vec<u64>> = self.tables[..k]
            .iter()
            .map(|t| {
                let mut fa: Vec<u64> = a.iter().map(|x| residue(x, t.p)).collect();
                let mut fb: Vec<u64> = b.iter().map(|x| residue(x, t.p)).collect();
                t.forward(&mut fa);
                t.forward(&mut fb);
                for (x, y) in fa.iter_mut().zip(&fb) {
                    *x = mul_mod(*x, *y, t.p);
                }
                t.inverse(&mut fa);
                fa
            })
            .collect();

        let basis = &self.bases[k - 1];
        let mut residues = vec![0u64; k];
        (0..self.n)
            .map(|i| {
                for (slot, column) in residues.iter_mut().zip(&per_prime) {
                    *slot = column[i];
                }
                basis.reconstruct(&residues)
            })
            .collect()
    }
}
