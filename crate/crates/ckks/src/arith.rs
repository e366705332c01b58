//! Word-sized modular arithmetic and NTT-friendly prime search.

#[inline]
pub(crate) fn mul_mod(a: u64, b: u64, m: u64) -> u64 {
    ((a as u128 * b as u128) % m as u128) as u64
}

#[inline]
pub(crate) fn add_mod(a: u64, b: u64, m: u64) -> u64 {
    let s = a as u128 + b as u128;
    if s >= m as u128 {
        (s - m as u128) as u64
    } else {
        s as u64
    }
}

#[inline]
pub(crate) fn sub_mod(a: u64, b: u64, m: u64) -> u64 {
    if a >= b {
        a - b
    } else {
        m - (b - a)
    }
}

pub(crate) fn pow_mod(mut base: u64, mut exp: u64, m: u64) -> u64 {
    let mut acc = 1u64 % m;
    base %= m;
    while exp > 0 {
        if exp & 1 == 1 {
            acc = mul_mod(acc, base, m);
        }
        base = mul_mod(base, base, m);
        exp >>= 1;
    }
    acc
}

/// Inverse of `a` modulo the prime `p`.
pub(crate) fn inv_mod(a: u64, p: u64) -> u64 {
    pow_mod(a, p - 2, p)
}

/// Deterministic Miller-Rabin, exact for every `u64`.
pub(crate) fn is_prime(n: u64) -> bool {
    const BASES: [u64; 12] = [2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37];
    if n < 2 {
        return false;
    }
    for &p in &BASES {
        if n % p == 0 {
            return n == p;
        }
    }
    let mut d = n - 1;
    let mut r = 0;
    while d % 2 == 0 {
        d /= 2;
        r += 1;
    }
    'witness: for &a in &BASES {
        let mut x = pow_mod(a, d, n);
        if x == 1 || x == n - 1 {
            continue;
        }
        for _ in 1..r {
            x = mul_mod(x, x, n);
            if x == n - 1 {
                continue 'witness;
            }
        }
        return false;
    }
    true
}

/// Largest primes strictly below `2^bits` with `p ≡ 1 (mod step)`, skipping `exclude`.
pub(crate) fn primes_below(bits: u32, step: u64, count: usize, exclude: &[u64]) -> Vec<u64> {
    assert!((2..=63).contains(&bits), "prime size {bits} outside 2..=63 bits");
    let top = 1u64 << bits;
    let mut candidate = (top - 1) / step * step + 1;
    if candidate >= top {
        candidate -= step;
    }
    let floor = 1u64 << (bits - 1);
    let mut out = Vec::with_capacity(count);
    while out.len() < count && candidate > floor {
        if is_prime(candidate) && !exclude.contains(&candidate) {
            out.push(candidate);
        }
        candidate -= step;
    }
    out
}

/// A primitive `order`-th root of unity modulo `p`, `order` a power of two dividing `p - 1`.
pub(crate) fn primitive_root(order: u64, p: u64) -> u64 {
    debug_assert!(order.is_power_of_two() && (p - 1) % order == 0);
    let cofactor = (p - 1) / order;
    for x in 2..p {
        let g = pow_mod(x, cofactor, p);
        if pow_mod(g, order / 2, p) == p - 1 {
            return g;
        }
    }
    unreachable!("no primitive root of order {order} mod {p}")
}
