//! IDX files as used by (Fashion-)MNIST: big-endian magic `0x00000803` for
//! `u8` image cubes and `0x00000801` for `u8` label vectors.

use std::path::Path;

use super::{Dataset, Split};
use crate::error::{Error, Result};
use crate::tensor::Tensor;

const IMAGE_MAGIC: u32 = 0x0000_0803;
const LABEL_MAGIC: u32 = 0x0000_0801;
const FASHION_MEAN: f64 = 0.2860;
const FASHION_STD: f64 = 0.3530;

fn be_u32(bytes: &[u8], at: usize) -> Result<u32> {
    bytes
        .get(at..at + 4)
        .map(|b| u32::from_be_bytes(b.try_into().expect("4 bytes")))
        .ok_or_else(|| Error::Data("IDX header truncated".into()))
}

/// Returns `(count, rows, cols, pixels)`.
pub fn parse_idx_images(bytes: &[u8]) -> Result<(usize, usize, usize, &[u8])> {
    let magic = be_u32(bytes, 0)?;
    if magic != IMAGE_MAGIC {
        return Err(Error::Data(format!("IDX image magic {magic:#010x}, expected {IMAGE_MAGIC:#010x}")));
    }
    let n = be_u32(bytes, 4)? as usize;
    let rows = be_u32(bytes, 8)? as usize;
    let cols = be_u32(bytes, 12)? as usize;
    let body = &bytes[16..];
    if body.len() != n * rows * cols {
        return Err(Error::Data(format!(
            "IDX image body has {} bytes, header says {n}×{rows}×{cols}",
            body.len()
        )));
    }
    Ok((n, rows, cols, body))
}

pub fn parse_idx_labels(bytes: &[u8]) -> Result<&[u8]> {
    let magic = be_u32(bytes, 0)?;
    if magic != LABEL_MAGIC {
        return Err(Error::Data(format!("IDX label magic {magic:#010x}, expected {LABEL_MAGIC:#010x}")));
    }
    let n = be_u32(bytes, 4)? as usize;
    let body = &bytes[8..];
    if body.len() != n {
        return Err(Error::Data(format!("IDX label body has {} bytes, header says {n}", body.len())));
    }
    Ok(body)
}

pub(crate) fn idx_dataset(images: &[u8], labels: &[u8]) -> Result<Dataset> {
    let (n, rows, cols, pixels) = parse_idx_images(images)?;
    let labels = parse_idx_labels(labels)?;
    if labels.len() != n {
        return Err(Error::Data(format!("{n} images but {} labels", labels.len())));
    }
    let images = pixels
        .chunks_exact(rows * cols)
        .map(|img| {
            let data = img.iter().map(|&p| (p as f64 / 255.0 - FASHION_MEAN) / FASHION_STD).collect();
            Tensor::new(vec![1, rows, cols], data)
        })
        .collect::<Result<Vec<_>>>()?;
    Dataset::new([1, rows, cols], 10, images, labels.iter().map(|&l| l as usize).collect())
}

/// Reads the four standard `*-ubyte` files from `dir`.
pub fn load_fashion_mnist(dir: &Path) -> Result<Split> {
    let read = |name: &str| -> Result<Vec<u8>> {
        let path = dir.join(name);
        std::fs::read(&path).map_err(|e| Error::Data(format!("{}: {e}", path.display())))
    };
    Ok(Split {
        train: idx_dataset(&read("train-images-idx3-ubyte")?, &read("train-labels-idx1-ubyte")?)?,
        test: idx_dataset(&read("t10k-images-idx3-ubyte")?, &read("t10k-labels-idx1-ubyte")?)?,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn header(magic: u32, dims: &[u32]) -> Vec<u8> {
        let mut v = magic.to_be_bytes().to_vec();
        for d in dims {
            v.extend_from_slice(&d.to_be_bytes());
        }
        v
    }

    #[test]
    fn parses_small_files() {
        let mut imgs = header(IMAGE_MAGIC, &[2, 2, 3]);
        imgs.extend((0..12).map(|i| i as u8 * 20));
        let mut labels = header(LABEL_MAGIC, &[2]);
        labels.extend([7, 1]);
        let d = idx_dataset(&imgs, &labels).unwrap();
        assert_eq!(d.shape(), [1, 2, 3]);
        assert_eq!(d.labels(), &[7, 1]);
        assert!((d.images()[1].data()[0] - (120.0 / 255.0 - 0.2860) / 0.3530).abs() < 1e-12);
    }

    #[test]
    fn rejects_bad_headers() {
        assert!(parse_idx_images(&header(LABEL_MAGIC, &[0, 0, 0])).is_err());
        assert!(parse_idx_images(&header(IMAGE_MAGIC, &[1, 2, 2])).is_err());
        assert!(parse_idx_labels(&header(LABEL_MAGIC, &[3])).is_err());
        assert!(parse_idx_labels(&[0, 0]).is_err());
    }
}
