//! In-memory labelled image datasets and their sources.

mod cifar;
mod idx;
mod synthetic;

pub use cifar::{load_cifar10, parse_cifar10, CIFAR_RECORD_LEN};
pub use idx::{load_fashion_mnist, parse_idx_images, parse_idx_labels};
pub use synthetic::{synthetic, SyntheticSpec};

use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::tensor::Tensor;

/// Images stored as `[C, H, W]` tensors with class labels.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    shape: [usize; 3],
    n_classes: usize,
    images: Vec<Tensor>,
    labels: Vec<usize>,
}

impl Dataset {
    pub fn new(shape: [usize; 3], n_classes: usize, images: Vec<Tensor>, labels: Vec<usize>) -> Result<Self> {
        if images.len() != labels.len() {
            return Err(Error::Data(format!("{} images but {} labels", images.len(), labels.len())));
        }
        if let Some(t) = images.iter().find(|t| t.shape() != shape) {
            return Err(Error::Data(format!("image shape {:?} differs from {shape:?}", t.shape())));
        }
        if let Some(&l) = labels.iter().find(|&&l| l >= n_classes) {
            return Err(Error::Data(format!("label {l} out of range for {n_classes} classes")));
        }
        Ok(Self {
            shape,
            n_classes,
            images,
            labels,
        })
    }

    pub fn shape(&self) -> [usize; 3] {
        self.shape
    }

    pub fn n_classes(&self) -> usize {
        self.n_classes
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn images(&self) -> &[Tensor] {
        &self.images
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    /// The samples at `indices`, in that order.
    pub fn subset(&self, indices: &[usize]) -> Self {
        Self {
            shape: self.shape,
            n_classes: self.n_classes,
            images: indices.iter().map(|&i| self.images[i].clone()).collect(),
            labels: indices.iter().map(|&i| self.labels[i]).collect(),
        }
    }

    /// Keeps the first `n` samples.
    pub fn truncate(&mut self, n: usize) {
        self.images.truncate(n);
        self.labels.truncate(n);
    }

    pub fn class_counts(&self) -> Vec<usize> {
        let mut c = vec![0; self.n_classes];
        for &l in &self.labels {
            c[l] += 1;
        }
        c
    }

    /// SHA-256 over shape, labels and pixel bits, as lowercase hex.
    pub fn checksum(&self) -> String {
        let mut h = Sha256::new();
        for d in self.shape {
            h.update((d as u64).to_le_bytes());
        }
        h.update((self.n_classes as u64).to_le_bytes());
        for (img, &l) in self.images.iter().zip(&self.labels) {
            h.update((l as u64).to_le_bytes());
            for v in img.data() {
                h.update(v.to_le_bytes());
            }
        }
        h.finalize().iter().map(|b| format!("{b:02x}")).collect()
    }
}

/// A train/test pair from one source.
#[derive(Debug, Clone)]
pub struct Split {
    pub train: Dataset,
    pub test: Dataset,
}
