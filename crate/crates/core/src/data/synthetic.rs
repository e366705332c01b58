//! Seeded Gaussian-blob images: each class has a fixed random prototype and
//! samples are the prototype plus i.i.d. Gaussian pixel noise.

use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::{Dataset, Split};
use crate::error::{config_err, Result};
use crate::rng::{stream, Purpose};
use crate::tensor::Tensor;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SyntheticSpec {
    pub channels: usize,
    pub height: usize,
    pub width: usize,
    pub classes: usize,
    pub train: usize,
    pub test: usize,
    /// Standard deviation of the pixel noise around each prototype.
    pub noise: f64,
}

impl Default for SyntheticSpec {
    fn default() -> Self {
        Self {
            channels: 1,
            height: 8,
            width: 8,
            classes: 2,
            train: 800,
            test: 200,
            noise: 0.5,
        }
    }
}

impl SyntheticSpec {
    pub fn validate(&self) -> Result<()> {
        if self.channels == 0 || self.height == 0 || self.width == 0 {
            return Err(config_err!("synthetic image dimensions must be positive"));
        }
        if self.classes < 2 {
            return Err(config_err!("synthetic data needs at least 2 classes"));
        }
        if self.train == 0 || self.test == 0 {
            return Err(config_err!("synthetic train and test sizes must be positive"));
        }
        if !(self.noise >= 0.0 && self.noise.is_finite()) {
            return Err(config_err!("synthetic noise must be non-negative, got {}", self.noise));
        }
        Ok(())
    }
}

/// Labels cycle through the classes, so both splits are balanced.
pub fn synthetic(spec: &SyntheticSpec, seed: u64) -> Result<Split> {
    spec.validate()?;
    let shape = [spec.channels, spec.height, spec.width];
    let pixels = spec.channels * spec.height * spec.width;
    let mut proto_rng = stream(seed, Purpose::Data, 0, 0);
    let prototypes: Vec<Vec<f64>> = (0..spec.classes)
        .map(|_| (0..pixels).map(|_| proto_rng.random_range(-1.0..1.0)).collect())
        .collect();
    let noise = Normal::new(0.0, spec.noise).map_err(|e| config_err!("{e}"))?;
    let make = |count: usize, round: u64| -> Result<Dataset> {
        let mut rng = stream(seed, Purpose::Data, 1, round);
        let mut images = Vec::with_capacity(count);
        let mut labels = Vec::with_capacity(count);
        for i in 0..count {
            let label = i % spec.classes;
            let data = prototypes[label].iter().map(|&p| p + noise.sample(&mut rng)).collect();
            images.push(Tensor::new(shape.to_vec(), data)?);
            labels.push(label);
        }
        Dataset::new(shape, spec.classes, images, labels)
    };
    Ok(Split {
        train: make(spec.train, 1)?,
        test: make(spec.test, 2)?,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sizes_balance_and_determinism() {
        let spec = SyntheticSpec::default();
        let a = synthetic(&spec, 7).unwrap();
        assert_eq!(a.train.len(), 800);
        assert_eq!(a.test.len(), 200);
        assert_eq!(a.train.class_counts(), vec![400, 400]);
        let b = synthetic(&spec, 7).unwrap();
        assert_eq!(a.train, b.train);
        assert_ne!(a.train, synthetic(&spec, 8).unwrap().train);
        assert_ne!(a.train.images()[0], a.test.images()[0]);
    }
}
