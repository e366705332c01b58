use crate::error::{input_err, Result};
use crate::tensor::Tensor;

/// Cross-entropy of `softmax(logits)` against `label`, with its logit gradient
/// `softmax − one_hot(label)`. Uses the max-shift for stability.
pub fn softmax_cross_entropy(logits: &Tensor, label: usize) -> Result<(f64, Tensor)> {
    let m = logits.len();
    if label >= m {
        return Err(input_err!("label {label} out of range for {m} classes"));
    }
    let z = logits.data();
    let max = z.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = z.iter().map(|&v| (v - max).exp()).collect();
    let sum: f64 = exps.iter().sum();
    let loss = sum.ln() - (z[label] - max);
    let mut grad: Vec<f64> = exps.iter().map(|e| e / sum).collect();
    grad[label] -= 1.0;
    Ok((loss, Tensor::new(logits.shape().to_vec(), grad)?))
}

/// Index of the largest logit (first one on ties).
pub fn argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in values.iter().enumerate() {
        if v > values[best] {
            best = i;
        }
    }
    best
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn uniform_logits_give_ln_m() {
        let (loss, grad) = softmax_cross_entropy(&Tensor::filled(&[10], 0.3), 4).unwrap();
        assert!((loss - 10f64.ln()).abs() < 1e-12);
        assert!((grad.data()[4] + 0.9).abs() < 1e-12);
    }

    #[test]
    fn large_logits_do_not_overflow() {
        let (loss, grad) = softmax_cross_entropy(&Tensor::from_vec(vec![1000.0, 0.0]), 0).unwrap();
        assert!(loss.is_finite() && loss.abs() < 1e-12);
        assert!(grad.is_finite());
    }

    #[test]
    fn label_out_of_range() {
        assert!(softmax_cross_entropy(&Tensor::zeros(&[3]), 3).is_err());
    }

    #[test]
    fn argmax_first_on_ties() {
        assert_eq!(argmax(&[1.0, 3.0, 3.0]), 1);
        assert_eq!(argmax(&[-1.0]), 0);
    }

    proptest! {
        #[test]
        fn gradient_sums_to_zero(logits in proptest::collection::vec(-50.0f64..50.0, 2..20), pick in 0usize..1000) {
            let m = logits.len();
            let (_, g) = softmax_cross_entropy(&Tensor::from_vec(logits), pick % m).unwrap();
            let s: f64 = g.data().iter().sum();
            prop_assert!(s.abs() <= f64::EPSILON * m as f64 * 4.0);
        }
    }
}
