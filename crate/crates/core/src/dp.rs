//! Laplace privatization of validation accuracies and the multi-round
//! privacy accountant.

use rand::Rng;

use crate::error::{config_err, input_err, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PrivacySpec {
    pub epsilon_per_round: f64,
    pub delta: f64,
    pub rounds: u32,
}

impl PrivacySpec {
    pub fn new(epsilon_per_round: f64, delta: f64, rounds: u32) -> Result<Self> {
        if !(epsilon_per_round > 0.0 && epsilon_per_round.is_finite()) {
            return Err(config_err!("epsilon must be positive and finite, got {epsilon_per_round}"));
        }
        if !(delta > 0.0 && delta < 1.0) {
            return Err(config_err!("delta must lie in (0, 1), got {delta}"));
        }
        if rounds == 0 {
            return Err(config_err!("rounds must be at least 1"));
        }
        Ok(Self {
            epsilon_per_round,
            delta,
            rounds,
        })
    }
}

/// `ε_total = √(2T ln(1/δ))·ε + T·ε·(e^ε − 1)`.
pub fn compose_privacy(spec: &PrivacySpec) -> f64 {
    let t = spec.rounds as f64;
    let e = spec.epsilon_per_round;
    (2.0 * t * (1.0 / spec.delta).ln()).sqrt() * e + t * e * e.exp_m1()
}

/// One Laplace(0, `scale`) draw by inverse CDF: `−scale·sign(u)·ln(1 − 2|u|)`, `u ~ U(−½, ½)`.
pub fn laplace_sample<R: Rng + ?Sized>(scale: f64, rng: &mut R) -> Result<f64> {
    if !(scale > 0.0 && scale.is_finite()) {
        return Err(input_err!("Laplace scale must be positive, got {scale}"));
    }
    let u = loop {
        let u = rng.random::<f64>() - 0.5;
        // u = −½ would map to an infinite draw
        if u > -0.5 {
            break u;
        }
    };
    Ok(-scale * u.signum() * (1.0 - 2.0 * u.abs()).ln())
}

/// A validation accuracy after noise and clamping. This is the only form of
/// accuracy that leaves a client.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PrivatizedAccuracy {
    value: f64,
    sensitivity: f64,
    client_id: u32,
    round: u32,
}

impl PrivatizedAccuracy {
    /// Rebuilds a received value; `value` must already be in `[0, 1]`.
    pub fn from_parts(value: f64, validation_size: u32, client_id: u32, round: u32) -> Result<Self> {
        if !(0.0..=1.0).contains(&value) {
            return Err(input_err!("privatized accuracy {value} outside [0, 1]"));
        }
        if validation_size == 0 {
            return Err(input_err!("validation size must be positive"));
        }
        Ok(Self {
            value,
            sensitivity: 1.0 / validation_size as f64,
            client_id,
            round,
        })
    }

    pub fn value(&self) -> f64 {
        self.value
    }

    /// `1 / m`.
    pub fn sensitivity(&self) -> f64 {
        self.sensitivity
    }

    pub fn client_id(&self) -> u32 {
        self.client_id
    }

    pub fn round(&self) -> u32 {
        self.round
    }
}

/// `clamp(a + Lap(1/(m·ε)), 0, 1)`. Also returns the raw noise draw.
pub fn privatize_with_noise<R: Rng + ?Sized>(
    accuracy: f64,
    validation_size: u32,
    epsilon: f64,
    client_id: u32,
    round: u32,
    rng: &mut R,
) -> Result<(PrivatizedAccuracy, f64)> {
    if !(0.0..=1.0).contains(&accuracy) {
        return Err(input_err!("accuracy {accuracy} outside [0, 1]"));
    }
    if validation_size == 0 {
        return Err(input_err!("validation size must be positive"));
    }
    if !(epsilon > 0.0) {
        return Err(input_err!("epsilon must be positive, got {epsilon}"));
    }
    let sensitivity = 1.0 / validation_size as f64;
    let noise = laplace_sample(sensitivity / epsilon, rng)?;
    let value = (accuracy + noise).clamp(0.0, 1.0);
    Ok((
        PrivatizedAccuracy {
            value,
            sensitivity,
            client_id,
            round,
        },
        noise,
    ))
}

pub fn privatize_accuracy<R: Rng + ?Sized>(
    accuracy: f64,
    validation_size: u32,
    epsilon: f64,
    client_id: u32,
    round: u32,
    rng: &mut R,
) -> Result<PrivatizedAccuracy> {
    privatize_with_noise(accuracy, validation_size, epsilon, client_id, round, rng).map(|(p, _)| p)
}

/// Tracks cumulative spend round by round. Exceeding the budget only warns.
#[derive(Debug, Clone)]
pub struct PrivacyAccountant {
    epsilon_per_round: f64,
    delta: f64,
    budget: Option<f64>,
    rounds_spent: u32,
    warned: bool,
}

impl PrivacyAccountant {
    pub fn new(epsilon_per_round: f64, delta: f64, budget: Option<f64>) -> Result<Self> {
        PrivacySpec::new(epsilon_per_round, delta, 1)?;
        Ok(Self {
            epsilon_per_round,
            delta,
            budget,
            rounds_spent: 0,
            warned: false,
        })
    }

    /// Records one more round and returns the composed ε after it.
    pub fn record_round(&mut self) -> f64 {
        self.rounds_spent += 1;
        let total = self.epsilon_total();
        if let Some(b) = self.budget {
            if total > b && !self.warned {
                log::warn!("privacy spend {total:.4} exceeds configured budget {b} after round {}", self.rounds_spent);
                self.warned = true;
            }
        }
        total
    }

    pub fn rounds_spent(&self) -> u32 {
        self.rounds_spent
    }

    pub fn epsilon_total(&self) -> f64 {
        if self.rounds_spent == 0 {
            return 0.0;
        }
        compose_privacy(&PrivacySpec {
            epsilon_per_round: self.epsilon_per_round,
            delta: self.delta,
            rounds: self.rounds_spent,
        })
    }
}
