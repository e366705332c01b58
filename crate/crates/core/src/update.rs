//! The message a client sends after local training, and its byte encoding.
//!
//! ```text
//! magic            4 bytes "HQCU"
//! version          u16
//! client_id        u32
//! round            u32
//! accuracy         f64   privatized, in [0, 1]
//! validation_size  u32
//! train_size       u32
//! layer_count      u32
//!   name_len u16, name (UTF-8), tensor_count u32,
//!     per tensor: rank u32, dims u32 × rank, values f64 × product(dims)
//! has_ciphertext   u8 (0 or 1)
//!   length u64, ciphertext bytes
//! ```
//! All integers little-endian.

use hqfl_ckks::{Ciphertext, CkksContext};

use crate::dp::PrivatizedAccuracy;
use crate::error::{Error, Result};
use crate::tensor::Tensor;

pub const MAGIC: [u8; 4] = *b"HQCU";
pub const VERSION: u16 = 1;

/// A plaintext layer in an update: name plus tensors in model order.
#[derive(Debug, Clone, PartialEq)]
pub struct NamedTensors {
    pub name: String,
    pub tensors: Vec<Tensor>,
}

#[derive(Debug, Clone)]
pub struct ClientUpdate {
    pub client_id: u32,
    pub round: u32,
    /// Unfrozen, non-classifier layers.
    pub layers: Vec<NamedTensors>,
    /// Flattened final-classifier parameters (weights then bias), encrypted.
    /// Absent only when that layer is frozen.
    pub classifier: Option<Ciphertext>,
    pub accuracy: PrivatizedAccuracy,
    pub validation_size: u32,
    pub train_size: u32,
}

fn protocol(msg: impl Into<String>) -> Error {
    Error::Protocol(msg.into())
}

impl ClientUpdate {
    /// Number of plaintext parameters carried.
    pub fn plaintext_params(&self) -> usize {
        self.layers.iter().flat_map(|l| &l.tensors).map(Tensor::len).sum()
    }

    pub fn to_bytes(&self, ctx: &CkksContext) -> Vec<u8> {
        let mut out = Vec::new();
        out.extend_from_slice(&MAGIC);
        out.extend_from_slice(&VERSION.to_le_bytes());
        out.extend_from_slice(&self.client_id.to_le_bytes());
        out.extend_from_slice(&self.round.to_le_bytes());
        out.extend_from_slice(&self.accuracy.value().to_le_bytes());
        out.extend_from_slice(&self.validation_size.to_le_bytes());
        out.extend_from_slice(&self.train_size.to_le_bytes());
        out.extend_from_slice(&(self.layers.len() as u32).to_le_bytes());
        for layer in &self.layers {
            out.extend_from_slice(&(layer.name.len() as u16).to_le_bytes());
            out.extend_from_slice(layer.name.as_bytes());
            out.extend_from_slice(&(layer.tensors.len() as u32).to_le_bytes());
            for t in &layer.tensors {
                out.extend_from_slice(&(t.shape().len() as u32).to_le_bytes());
                for &d in t.shape() {
                    out.extend_from_slice(&(d as u32).to_le_bytes());
                }
                for v in t.data() {
                    out.extend_from_slice(&v.to_le_bytes());
                }
            }
        }
        match &self.classifier {
            None => out.push(0),
            Some(ct) => {
                out.push(1);
                let bytes = ct.to_bytes(ctx);
                out.extend_from_slice(&(bytes.len() as u64).to_le_bytes());
                out.extend_from_slice(&bytes);
            }
        }
        out
    }

    pub fn from_bytes(ctx: &CkksContext, bytes: &[u8]) -> Result<Self> {
        let mut r = Reader { bytes, pos: 0 };
        if r.take(4)? != MAGIC {
            return Err(protocol("update has bad magic"));
        }
        let version = r.u16()?;
        if version != VERSION {
            return Err(protocol(format!("unsupported update version {version}")));
        }
        let client_id = r.u32()?;
        let round = r.u32()?;
        let value = f64::from_le_bytes(r.array()?);
        let validation_size = r.u32()?;
        let train_size = r.u32()?;
        let accuracy = PrivatizedAccuracy::from_parts(value, validation_size, client_id, round)
            .map_err(|e| protocol(e.to_string()))?;
        let n_layers = r.u32()? as usize;
        let mut layers = Vec::with_capacity(n_layers.min(1024));
        for _ in 0..n_layers {
            let len = r.u16()? as usize;
            let name = std::str::from_utf8(r.take(len)?)
                .map_err(|_| protocol("layer name is not UTF-8"))?
                .to_owned();
            let n_tensors = r.u32()? as usize;
            let mut tensors = Vec::with_capacity(n_tensors.min(64));
            for _ in 0..n_tensors {
                let rank = r.u32()? as usize;
                if rank > 8 {
                    return Err(protocol(format!("tensor rank {rank} too large")));
                }
                let shape = (0..rank).map(|_| r.u32().map(|d| d as usize)).collect::<Result<Vec<_>>>()?;
                let count = shape
                    .iter()
                    .try_fold(1usize, |a, &d| a.checked_mul(d))
                    .filter(|&c| c.checked_mul(8).is_some_and(|b| b <= r.remaining()))
                    .ok_or_else(|| protocol(format!("tensor {shape:?} exceeds message size")))?;
                let data = (0..count)
                    .map(|_| r.array().map(f64::from_le_bytes))
                    .collect::<Result<Vec<_>>>()?;
                tensors.push(Tensor::new(shape, data).map_err(|e| protocol(e.to_string()))?);
            }
            layers.push(NamedTensors { name, tensors });
        }
        let classifier = match r.take(1)?[0] {
            0 => None,
            1 => {
                let len = u64::from_le_bytes(r.array()?) as usize;
                Some(Ciphertext::from_bytes(ctx, r.take(len)?)?)
            }
            b => return Err(protocol(format!("invalid ciphertext flag {b}"))),
        };
        if r.remaining() != 0 {
            return Err(protocol(format!("{} trailing bytes in update", r.remaining())));
        }
        Ok(Self {
            client_id,
            round,
            layers,
            classifier,
            accuracy,
            validation_size,
            train_size,
        })
    }
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        if n > self.remaining() {
            return Err(protocol("update truncated"));
        }
        let s = &self.bytes[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    fn array<const N: usize>(&mut self) -> Result<[u8; N]> {
        Ok(self.take(N)?.try_into().expect("length checked"))
    }

    fn u16(&mut self) -> Result<u16> {
        self.array().map(u16::from_le_bytes)
    }

    fn u32(&mut self) -> Result<u32> {
        self.array().map(u32::from_le_bytes)
    }

    fn remaining(&self) -> usize {
        self.bytes.len() - self.pos
    }
}
