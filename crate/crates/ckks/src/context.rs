use num_bigint::BigInt;
use num_traits::{FromPrimitive, Signed, ToPrimitive, Zero};
use rand::Rng;
use rand_distr::{Distribution, Normal};

use crate::arith::primes_below;
use crate::ciphertext::{Ciphertext, Plaintext};
use crate::encoding::Encoder;
use crate::keys::{KeyPair, PublicKey, SecretKey};
use crate::poly::{center, round_div, PolyMultiplier};
use crate::{HeError, HeParams};

/// Standard deviation of the discrete Gaussian error distribution.
pub const NOISE_STDDEV: f64 = 3.2;

/// Tolerance for the sum of aggregation weights.
const WEIGHT_SUM_TOL: f64 = 1e-9;

/// Precomputed state for one parameter set: chain primes, modulus ladder,
/// exact multiplier and encoder tables. Immutable and shareable.
#[derive(Debug, Clone)]
pub struct CkksContext {
    params: HeParams,
    primes: Vec<u64>,
    /// `moduli[l]` is the product of the first `l` data primes.
    moduli: Vec<BigInt>,
    half_moduli: Vec<BigInt>,
    multiplier: PolyMultiplier,
    encoder: Encoder,
}

impl CkksContext {
    pub fn new(params: HeParams) -> Result<Self, HeError> {
        params.validate()?;
        let n = params.ring_degree;
        let mut primes: Vec<u64> = Vec::with_capacity(params.moduli_bits.len());
        for &bits in &params.moduli_bits {
            let p = primes_below(bits, 2 * n as u64, 1, &primes);
            let p = *p.first().ok_or_else(|| {
                HeError::Config(format!("no {bits}-bit NTT-friendly prime left for N = {n}"))
            })?;
            primes.push(p);
        }

        let mut moduli = vec![BigInt::from(1u8)];
        for &p in &primes[..params.max_level()] {
            let next = moduli.last().expect("non-empty") * p;
            moduli.push(next);
        }
        let half_moduli = moduli.iter().map(|q| q >> 1).collect();
        let top_bits = moduli.last().expect("non-empty").bits();
        Ok(Self {
            multiplier: PolyMultiplier::new(n, top_bits + 1),
            encoder: Encoder::new(n),
            params,
            primes,
            moduli,
            half_moduli,
        })
    }

    pub fn params(&self) -> &HeParams {
        &self.params
    }

    pub fn ring_degree(&self) -> usize {
        self.params.ring_degree
    }

    pub fn slot_count(&self) -> usize {
        self.encoder.slots()
    }

    pub fn max_level(&self) -> usize {
        self.params.max_level()
    }

    /// Default encoding scale `2^scale_bits`.
    pub fn scale(&self) -> f64 {
        self.params.scale()
    }

    /// All chain primes, special prime last.
    pub fn primes(&self) -> &[u64] {
        &self.primes
    }

    pub fn modulus(&self, level: usize) -> &BigInt {
        &self.moduli[level]
    }

    pub(crate) fn reduce(&self, x: &BigInt, level: usize) -> BigInt {
        center(x, &self.moduli[level], &self.half_moduli[level])
    }

    fn check_level(&self, level: usize) -> Result<(), HeError> {
        if level == 0 || level > self.max_level() {
            return Err(HeError::Protocol(format!(
                "level {level} outside 1..={}",
                self.max_level()
            )));
        }
        Ok(())
    }

    // ---- sampling --------------------------------------------------------

    fn sample_uniform<R: Rng + ?Sized>(&self, level: usize, rng: &mut R) -> Vec<BigInt> {
        let q = &self.moduli[level];
        let bytes = (q.bits() as usize + 64).div_ceil(8);
        let mut buf = vec![0u8; bytes];
        (0..self.ring_degree())
            .map(|_| {
                rng.fill_bytes(&mut buf);
                self.reduce(&BigInt::from_bytes_le(num_bigint::Sign::Plus, &buf), level)
            })
            .collect()
    }

    fn sample_gaussian<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<BigInt> {
        let normal = Normal::new(0.0, NOISE_STDDEV).expect("valid stddev");
        (0..self.ring_degree())
            .map(|_| BigInt::from(normal.sample(rng).round() as i64))
            .collect()
    }

    /// Ternary polynomial with exactly `N/2` non-zero coefficients.
    fn sample_secret<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<i8> {
        let n = self.ring_degree();
        let mut s = vec![0i8; n];
        for idx in rand::seq::index::sample(rng, n, n / 2) {
            s[idx] = if rng.random::<bool>() { 1 } else { -1 };
        }
        s
    }

    /// Ternary polynomial with P(0) = 1/2, P(±1) = 1/4.
    fn sample_zo<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<BigInt> {
        (0..self.ring_degree())
            .map(|_| match rng.random_range(0..4u8) {
                0 => BigInt::from(1),
                1 => BigInt::from(-1),
                _ => BigInt::zero(),
            })
            .collect()
    }

    // ---- ring helpers ----------------------------------------------------

    fn poly_add(&self, a: &[BigInt], b: &[BigInt], level: usize) -> Vec<BigInt> {
        a.iter()
            .zip(b)
            .map(|(x, y)| self.reduce(&(x + y), level))
            .collect()
    }

    fn poly_mul(&self, a: &[BigInt], b: &[BigInt], level: usize) -> Vec<BigInt> {
        self.multiplier
            .mul(a, b)
            .iter()
            .map(|x| self.reduce(x, level))
            .collect()
    }

    fn at_level(&self, a: &[BigInt], level: usize) -> Vec<BigInt> {
        a.iter().map(|x| self.reduce(x, level)).collect()
    }

    // ---- keys, encoding, encryption -----------------------------------------

    pub fn keygen<R: Rng + ?Sized>(&self, rng: &mut R) -> KeyPair {
        let top = self.max_level();
        let s = self.sample_secret(rng);
        let a = self.sample_uniform(top, rng);
        let e = self.sample_gaussian(rng);
        let s_big: Vec<BigInt> = s.iter().map(|&c| BigInt::from(c)).collect();
        let a_s = self.multiplier.mul(&a, &s_big);
        let b = a_s
            .iter()
            .zip(&e)
            .map(|(x, err)| self.reduce(&(err - x), top))
            .collect();
        KeyPair {
            public: PublicKey { b, a },
            secret: SecretKey { s },
        }
    }

    /// Encode real values into slots at `scale`, under the level-`level` modulus.
    pub fn encode(&self, values: &[f64], scale: f64, level: usize) -> Result<Plaintext, HeError> {
        self.check_level(level)?;
        if values.len() > self.slot_count() {
            return Err(HeError::Input(format!(
                "{} values exceed the {} available slots",
                values.len(),
                self.slot_count()
            )));
        }
        if let Some(v) = values.iter().find(|v| !v.is_finite()) {
            return Err(HeError::Input(format!("non-finite value {v}")));
        }
        if !(scale.is_finite() && scale >= 1.0) {
            return Err(HeError::Input(format!("invalid scale {scale}")));
        }
        let coeffs = self
            .encoder
            .coefficients_for(values)
            .into_iter()
            .map(|c| self.scale_up(c, scale, level))
            .collect::<Result<Vec<_>, _>>()?;
        Ok(Plaintext {
            coeffs,
            scale,
            level,
        })
    }

    /// Encode `value` replicated across every slot: a constant polynomial.
    pub fn encode_constant(
        &self,
        value: f64,
        scale: f64,
        level: usize,
    ) -> Result<Plaintext, HeError> {
        self.check_level(level)?;
        if !value.is_finite() {
            return Err(HeError::Input(format!("non-finite value {value}")));
        }
        let mut coeffs = vec![BigInt::zero(); self.ring_degree()];
        coeffs[0] = self.scale_up(value, scale, level)?;
        Ok(Plaintext {
            coeffs,
            scale,
            level,
        })
    }

    fn scale_up(&self, c: f64, scale: f64, level: usize) -> Result<BigInt, HeError> {
        let v = BigInt::from_f64((c * scale).round())
            .ok_or_else(|| HeError::Input(format!("cannot scale {c}")))?;
        if v.abs() >= self.half_moduli[level] {
            return Err(HeError::Input(format!(
                "scaled value {c}·{scale:e} overflows the level-{level} modulus"
            )));
        }
        Ok(v)
    }

    pub fn decode(&self, pt: &Plaintext) -> Vec<f64> {
        let coeffs: Vec<f64> = pt
            .coeffs
            .iter()
            .map(|c| c.to_f64().unwrap_or(f64::NAN) / pt.scale)
            .collect();
        self.encoder.slots_of(&coeffs).iter().map(|z| z.re).collect()
    }

    pub fn encrypt<R: Rng + ?Sized>(
        &self,
        pt: &Plaintext,
        pk: &PublicKey,
        rng: &mut R,
    ) -> Result<Ciphertext, HeError> {
        let level = pt.level;
        self.check_level(level)?;
        let u = self.sample_zo(rng);
        let e0 = self.sample_gaussian(rng);
        let e1 = self.sample_gaussian(rng);
        let b = self.at_level(&pk.b, level);
        let a = self.at_level(&pk.a, level);
        let bu = self.multiplier.mul(&b, &u);
        let au = self.multiplier.mul(&a, &u);
        let c0 = (0..self.ring_degree())
            .map(|i| self.reduce(&(&bu[i] + &e0[i] + &pt.coeffs[i]), level))
            .collect();
        let c1 = (0..self.ring_degree())
            .map(|i| self.reduce(&(&au[i] + &e1[i]), level))
            .collect();
        Ok(Ciphertext {
            c0,
            c1,
            scale: pt.scale,
            level,
        })
    }

    pub fn decrypt(&self, ct: &Ciphertext, sk: &SecretKey) -> Result<Plaintext, HeError> {
        self.check_level(ct.level)?;
        if sk.s.len() != self.ring_degree() || ct.c0.len() != self.ring_degree() {
            return Err(HeError::Input("ring degree mismatch".into()));
        }
        let s: Vec<BigInt> = sk.s.iter().map(|&c| BigInt::from(c)).collect();
        let c1s = self.poly_mul(&ct.c1, &s, ct.level);
        let coeffs = self.poly_add(&ct.c0, &c1s, ct.level);
        Ok(Plaintext {
            coeffs,
            scale: ct.scale,
            level: ct.level,
        })
    }

    /// Encode at the default scale and top level, then encrypt.
    pub fn encrypt_values<R: Rng + ?Sized>(
        &self,
        values: &[f64],
        pk: &PublicKey,
        rng: &mut R,
    ) -> Result<Ciphertext, HeError> {
        let pt = self.encode(values, self.scale(), self.max_level())?;
        self.encrypt(&pt, pk, rng)
    }

    /// Decrypt and decode, returning the first `len` slots.
    pub fn decrypt_values(
        &self,
        ct: &Ciphertext,
        sk: &SecretKey,
        len: usize,
    ) -> Result<Vec<f64>, HeError> {
        let mut v = self.decode(&self.decrypt(ct, sk)?);
        v.truncate(len);
        Ok(v)
    }

    // ---- homomorphic operations ---------------------------------------------

    fn check_compatible(&self, a: &Ciphertext, b: &Ciphertext) -> Result<(), HeError> {
        if a.level != b.level {
            return Err(HeError::Protocol(format!(
                "level mismatch: {} vs {}",
                a.level, b.level
            )));
        }
        if !same_scale(a.scale, b.scale) {
            return Err(HeError::Protocol(format!(
                "scale mismatch: {:e} vs {:e}",
                a.scale, b.scale
            )));
        }
        Ok(())
    }

    pub fn add(&self, a: &Ciphertext, b: &Ciphertext) -> Result<Ciphertext, HeError> {
        self.check_compatible(a, b)?;
        Ok(Ciphertext {
            c0: self.poly_add(&a.c0, &b.c0, a.level),
            c1: self.poly_add(&a.c1, &b.c1, a.level),
            scale: a.scale,
            level: a.level,
        })
    }

    /// Multiply by a plaintext. The result's scale is the product of scales;
    /// call [`rescale`](Self::rescale) afterwards to drop one level.
    pub fn mul_plain(&self, ct: &Ciphertext, pt: &Plaintext) -> Result<Ciphertext, HeError> {
        if ct.level != pt.level {
            return Err(HeError::Protocol(format!(
                "plaintext level {} does not match ciphertext level {}",
                pt.level, ct.level
            )));
        }
        if ct.level < 2 {
            return Err(HeError::Protocol(
                "multiplicative levels exhausted: no prime left to rescale by".into(),
            ));
        }
        let (c0, c1) = if pt.is_constant() {
            let w = &pt.coeffs[0];
            let scale = |p: &[BigInt]| p.iter().map(|x| self.reduce(&(x * w), ct.level)).collect();
            (scale(&ct.c0), scale(&ct.c1))
        } else {
            (
                self.poly_mul(&ct.c0, &pt.coeffs, ct.level),
                self.poly_mul(&ct.c1, &pt.coeffs, ct.level),
            )
        };
        Ok(Ciphertext {
            c0,
            c1,
            scale: ct.scale * pt.scale,
            level: ct.level,
        })
    }

    /// Divide by the last prime of the current modulus, dropping one level.
    pub fn rescale(&self, ct: &Ciphertext) -> Result<Ciphertext, HeError> {
        if ct.level < 2 {
            return Err(HeError::Protocol("cannot rescale below level 1".into()));
        }
        let q = self.primes[ct.level - 1];
        let q_big = BigInt::from(q);
        let next = ct.level - 1;
        let down = |p: &[BigInt]| -> Vec<BigInt> {
            p.iter()
                .map(|x| self.reduce(&round_div(x, &q_big), next))
                .collect()
        };
        Ok(Ciphertext {
            c0: down(&ct.c0),
            c1: down(&ct.c1),
            scale: ct.scale / q as f64,
            level: next,
        })
    }

    /// `Σ w_i · ct_i` using one multiplicative level.
    ///
    /// Each weight is encoded at the scale of the prime that the final rescale
    /// removes, so the output scale equals the input scale exactly.
    pub fn secure_weighted_sum(
        &self,
        cts: &[Ciphertext],
        weights: &[f64],
    ) -> Result<Ciphertext, HeError> {
        if cts.is_empty() {
            return Err(HeError::Input("no ciphertexts to aggregate".into()));
        }
        if cts.len() != weights.len() {
            return Err(HeError::Input(format!(
                "{} ciphertexts but {} weights",
                cts.len(),
                weights.len()
            )));
        }
        let total: f64 = weights.iter().sum();
        if weights.iter().any(|w| !w.is_finite()) || (total - 1.0).abs() > WEIGHT_SUM_TOL {
            return Err(HeError::Input(format!(
                "weights must be finite and sum to 1 (sum = {total})"
            )));
        }
        let level = cts[0].level;
        for ct in &cts[1..] {
            self.check_compatible(&cts[0], ct)?;
        }
        if level < 2 {
            return Err(HeError::Protocol(
                "multiplicative levels exhausted: no prime left to rescale by".into(),
            ));
        }
        let weight_scale = self.primes[level - 1] as f64;
        let mut acc: Option<Ciphertext> = None;
        for (ct, &w) in cts.iter().zip(weights) {
            let pt = self.encode_constant(w, weight_scale, level)?;
            let term = self.mul_plain(ct, &pt)?;
            acc = Some(match acc {
                None => term,
                Some(sum) => self.add(&sum, &term)?,
            });
        }
        self.rescale(&acc.expect("non-empty"))
    }
}

fn same_scale(a: f64, b: f64) -> bool {
    (a - b).abs() <= 1e-9 * a.abs().max(b.abs())
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha20Rng;

    fn small() -> CkksContext {
        CkksContext::new(HeParams {
            ring_degree: 64,
            moduli_bits: vec![50, 40, 40, 50],
            scale_bits: 40,
        })
        .unwrap()
    }

    fn max_err(a: &[f64], b: &[f64]) -> f64 {
        a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
    }

    #[test]
    fn chain_primes_distinct_and_ntt_friendly() {
        let ctx = small();
        let ps = ctx.primes();
        assert_eq!(ps.len(), 4);
        for (i, &p) in ps.iter().enumerate() {
            assert_eq!(p % 128, 1);
            assert!(!ps[..i].contains(&p));
        }
        assert_eq!(ctx.modulus(3), &(BigInt::from(ps[0]) * ps[1] * ps[2]));
    }

    #[test]
    fn secret_has_half_weight() {
        let ctx = small();
        let kp = ctx.keygen(&mut ChaCha20Rng::seed_from_u64(1));
        assert_eq!(kp.secret.hamming_weight(), 32);
        assert!(kp.secret.coefficients().iter().all(|c| c.abs() <= 1));
    }

    #[test]
    fn too_many_values_rejected() {
        let ctx = small();
        let err = ctx.encode(&[0.0; 33], ctx.scale(), 3).unwrap_err();
        assert!(matches!(err, HeError::Input(_)));
    }

    #[test]
    fn rescale_at_bottom_level_is_protocol_error() {
        let ctx = small();
        let mut rng = ChaCha20Rng::seed_from_u64(2);
        let kp = ctx.keygen(&mut rng);
        let pt = ctx.encode(&[0.5], ctx.scale(), 1).unwrap();
        let ct = ctx.encrypt(&pt, &kp.public, &mut rng).unwrap();
        assert!(matches!(ctx.rescale(&ct), Err(HeError::Protocol(_))));
        let w = ctx.encode_constant(0.5, ctx.scale(), 1).unwrap();
        assert!(matches!(ctx.mul_plain(&ct, &w), Err(HeError::Protocol(_))));
    }

    #[test]
    fn general_plaintext_product_is_slotwise() {
        let ctx = small();
        let mut rng = ChaCha20Rng::seed_from_u64(3);
        let kp = ctx.keygen(&mut rng);
        let u: Vec<f64> = (0..32).map(|i| (i as f64 / 7.0).sin()).collect();
        let v: Vec<f64> = (0..32).map(|i| (i as f64 / 5.0).cos()).collect();
        let ct = ctx.encrypt_values(&u, &kp.public, &mut rng).unwrap();
        let pv = ctx.encode(&v, ctx.scale(), 3).unwrap();
        let prod = ctx.rescale(&ctx.mul_plain(&ct, &pv).unwrap()).unwrap();
        assert_eq!(prod.level(), 2);
        let got = ctx.decrypt_values(&prod, &kp.secret, 32).unwrap();
        let want: Vec<f64> = u.iter().zip(&v).map(|(a, b)| a * b).collect();
        assert!(max_err(&got, &want) < 1e-6);
    }

    #[test]
    fn weighted_sum_keeps_scale_exact() {
        let ctx = small();
        let mut rng = ChaCha20Rng::seed_from_u64(4);
        let kp = ctx.keygen(&mut rng);
        let a = ctx.encrypt_values(&[1.0, 2.0], &kp.public, &mut rng).unwrap();
        let b = ctx.encrypt_values(&[3.0, -2.0], &kp.public, &mut rng).unwrap();
        let s = ctx.secure_weighted_sum(&[a, b], &[0.25, 0.75]).unwrap();
        assert_eq!(s.scale(), ctx.scale());
        assert_eq!(s.level(), 2);
        let got = ctx.decrypt_values(&s, &kp.secret, 2).unwrap();
        assert!(max_err(&got, &[2.5, -1.0]) < 1e-6);
    }

    #[test]
    fn weighted_sum_input_errors() {
        let ctx = small();
        let mut rng = ChaCha20Rng::seed_from_u64(5);
        let kp = ctx.keygen(&mut rng);
        let a = ctx.encrypt_values(&[1.0], &kp.public, &mut rng).unwrap();
        assert!(matches!(
            ctx.secure_weighted_sum(&[a.clone()], &[0.5, 0.5]),
            Err(HeError::Input(_))
        ));
        assert!(matches!(
            ctx.secure_weighted_sum(&[a.clone()], &[0.7]),
            Err(HeError::Input(_))
        ));
        assert!(matches!(ctx.secure_weighted_sum(&[], &[]), Err(HeError::Input(_))));
        let lower = ctx.rescale(&ctx.mul_plain(&a, &ctx.encode_constant(1.0, ctx.scale(), 3).unwrap()).unwrap()).unwrap();
        assert!(matches!(
            ctx.secure_weighted_sum(&[a, lower], &[0.5, 0.5]),
            Err(HeError::Protocol(_))
        ));
    }
}
