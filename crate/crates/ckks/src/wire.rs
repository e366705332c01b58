//! Versioned binary encoding of ciphertexts.
//!
//! ```text
//! magic        4 bytes  "HQCT"
//! version      u16
//! ring_degree  u32
//! level        u32
//! scale        f64 (IEEE-754 bits)
//! limbs        u32      64-bit limbs per coefficient
//! c0, c1       each: u64 byte length, then ring_degree coefficients of
//!              `limbs` little-endian u64 limbs, value in [0, Q_level)
//! ```
//!
//! All integers are little-endian. The encoded length depends only on
//! `(ring_degree, level)`, so byte counts are stable across runs.

use num_bigint::{BigInt, BigUint, Sign};

use crate::ciphertext::Ciphertext;
use crate::context::CkksContext;
use crate::HeError;

pub const MAGIC: [u8; 4] = *b"HQCT";
pub const VERSION: u16 = 1;
const HEADER_LEN: usize = 4 + 2 + 4 + 4 + 8 + 4;

fn limbs_for(ctx: &CkksContext, level: usize) -> usize {
    (ctx.modulus(level).bits() as usize).div_ceil(64)
}

/// Exact size of an encoded ciphertext at `level`.
pub fn encoded_len(ctx: &CkksContext, level: usize) -> usize {
    HEADER_LEN + 2 * (8 + ctx.ring_degree() * limbs_for(ctx, level) * 8)
}

impl Ciphertext {
    pub fn to_bytes(&self, ctx: &CkksContext) -> Vec<u8> {
        let limbs = limbs_for(ctx, self.level);
        let q = ctx.modulus(self.level);
        let mut out = Vec::with_capacity(encoded_len(ctx, self.level));
        out.extend_from_slice(&MAGIC);
        out.extend_from_slice(&VERSION.to_le_bytes());
        out.extend_from_slice(&(self.ring_degree() as u32).to_le_bytes());
        out.extend_from_slice(&(self.level as u32).to_le_bytes());
        out.extend_from_slice(&self.scale.to_bits().to_le_bytes());
        out.extend_from_slice(&(limbs as u32).to_le_bytes());
        for poly in [&self.c0, &self.c1] {
            out.extend_from_slice(&((poly.len() * limbs * 8) as u64).to_le_bytes());
            for c in poly {
                let unsigned = if c.sign() == Sign::Minus { c + q } else { c.clone() };
                let mut bytes = unsigned.magnitude().to_bytes_le();
                bytes.resize(limbs * 8, 0);
                out.extend_from_slice(&bytes);
            }
        }
        out
    }

    pub fn from_bytes(ctx: &CkksContext, bytes: &[u8]) -> Result<Self, HeError> {
        let mut r = Reader { bytes, pos: 0 };
        if r.take(4)? != MAGIC {
            return Err(HeError::Wire("bad magic".into()));
        }
        let version = u16::from_le_bytes(r.array()?);
        if version != VERSION {
            return Err(HeError::Wire(format!("unsupported version {version}")));
        }
        let n = u32::from_le_bytes(r.array()?) as usize;
        if n != ctx.ring_degree() {
            return Err(HeError::Wire(format!(
                "ring degree {n} does not match context ({})",
                ctx.ring_degree()
            )));
        }
        let level = u32::from_le_bytes(r.array()?) as usize;
        if level == 0 || level > ctx.max_level() {
            return Err(HeError::Wire(format!("invalid level {level}")));
        }
        let scale = f64::from_bits(u64::from_le_bytes(r.array()?));
        if !(scale.is_finite() && scale > 0.0) {
            return Err(HeError::Wire(format!("invalid scale {scale}")));
        }
        let limbs = u32::from_le_bytes(r.array()?) as usize;
        if limbs != limbs_for(ctx, level) {
            return Err(HeError::Wire(format!("unexpected limb count {limbs}")));
        }
        let q = ctx.modulus(level);
        let mut polys = Vec::with_capacity(2);
        for _ in 0..2 {
            let len = u64::from_le_bytes(r.array()?) as usize;
            if len != n * limbs * 8 {
                return Err(HeError::Wire(format!("polynomial length {len} bytes")));
            }
            let body = r.take(len)?;
            let poly = body
                .chunks_exact(limbs * 8)
                .map(|chunk| {
                    let v = BigInt::from(BigUint::from_bytes_le(chunk));
                    if &v >= q {
                        Err(HeError::Wire("coefficient exceeds modulus".into()))
                    } else {
                        Ok(ctx.reduce(&v, level))
                    }
                })
                .collect::<Result<Vec<_>, _>>()?;
            polys.push(poly);
        }
        if r.pos != bytes.len() {
            return Err(HeError::Wire(format!(
                "{} trailing bytes",
                bytes.len() - r.pos
            )));
        }
        let c1 = polys.pop().expect("two polys");
        let c0 = polys.pop().expect("two polys");
        Ok(Ciphertext {
            c0,
            c1,
            scale,
            level,
        })
    }
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, len: usize) -> Result<&'a [u8], HeError> {
        let end = self
            .pos
            .checked_add(len)
            .filter(|&e| e <= self.bytes.len())
            .ok_or_else(|| HeError::Wire("truncated ciphertext".into()))?;
        let s = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn array<const K: usize>(&mut self) -> Result<[u8; K], HeError> {
        Ok(self.take(K)?.try_into().expect("length checked"))
    }
}
