//! CIFAR-10 binary batches: 3073-byte records of one label byte followed by
//! 1024 red, 1024 green and 1024 blue pixel bytes (row-major 32×32).

use std::path::Path;

use super::{Dataset, Split};
use crate::error::{Error, Result};
use crate::tensor::Tensor;

pub const CIFAR_RECORD_LEN: usize = 3073;
const MEAN: f64 = 0.5;
const STD: f64 = 0.5;

/// Pixels scaled to `[0, 1]` then normalized with mean 0.5 and std 0.5.
pub fn parse_cifar10(bytes: &[u8]) -> Result<Dataset> {
    if bytes.is_empty() || bytes.len() % CIFAR_RECORD_LEN != 0 {
        return Err(Error::Data(format!(
            "CIFAR-10 batch length {} is not a positive multiple of {CIFAR_RECORD_LEN}",
            bytes.len()
        )));
    }
    let mut images = Vec::with_capacity(bytes.len() / CIFAR_RECORD_LEN);
    let mut labels = Vec::with_capacity(images.capacity());
    for rec in bytes.chunks_exact(CIFAR_RECORD_LEN) {
        let label = rec[0] as usize;
        if label >= 10 {
            return Err(Error::Data(format!("CIFAR-10 label byte {label} out of range")));
        }
        let data = rec[1..].iter().map(|&p| (p as f64 / 255.0 - MEAN) / STD).collect();
        images.push(Tensor::new(vec![3, 32, 32], data)?);
        labels.push(label);
    }
    Dataset::new([3, 32, 32], 10, images, labels)
}

fn concat(parts: Vec<Dataset>) -> Result<Dataset> {
    let mut images = Vec::new();
    let mut labels = Vec::new();
    for p in parts {
        images.extend_from_slice(p.images());
        labels.extend_from_slice(p.labels());
    }
    Dataset::new([3, 32, 32], 10, images, labels)
}

/// Reads `data_batch_1.bin` … `data_batch_5.bin` and `test_batch.bin` from `dir`.
pub fn load_cifar10(dir: &Path) -> Result<Split> {
    let read = |name: &str| -> Result<Dataset> {
        let path = dir.join(name);
        let bytes = std::fs::read(&path).map_err(|e| Error::Data(format!("{}: {e}", path.display())))?;
        parse_cifar10(&bytes)
    };
    let train = (1..=5)
        .map(|i| read(&format!("data_batch_{i}.bin")))
        .collect::<Result<Vec<_>>>()?;
    Ok(Split {
        train: concat(train)?,
        test: read("test_batch.bin")?,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_records() {
        let mut bytes = vec![0u8; 2 * CIFAR_RECORD_LEN];
        bytes[0] = 3;
        bytes[1] = 255; // first red pixel
        bytes[CIFAR_RECORD_LEN] = 9;
        bytes[CIFAR_RECORD_LEN + 1 + 2048] = 51; // first blue pixel
        let d = parse_cifar10(&bytes).unwrap();
        assert_eq!(d.labels(), &[3, 9]);
        assert_eq!(d.images()[0].data()[0], 1.0);
        assert_eq!(d.images()[0].data()[1], -1.0);
        assert!((d.images()[1].data()[2048] - (0.2 - 0.5) / 0.5).abs() < 1e-12);
    }

    #[test]
    fn rejects_bad_input() {
        assert!(parse_cifar10(&[0u8; 100]).is_err());
        let mut bytes = vec![0u8; CIFAR_RECORD_LEN];
        bytes[0] = 10;
        assert!(parse_cifar10(&bytes).is_err());
    }
}
