//! Softmax and classification loss.

use crate::error::{Error, Result};
use crate::scalar::Scalar;

pub fn log_sum_exp<T: Scalar>(logits: &[T]) -> T {
    let max = logits.iter().copied().fold(T::neg_infinity(), T::max);
    let sum: T = logits.iter().map(|&z| (z - max).exp()).sum();
    max + sum.ln()
}

/// Max-shifted softmax; stable for logits of any finite magnitude.
pub fn softmax<T: Scalar>(logits: &[T]) -> Vec<T> {
    let max = logits.iter().copied().fold(T::neg_infinity(), T::max);
    let exps: Vec<T> = logits.iter().map(|&z| (z - max).exp()).collect();
    let sum: T = exps.iter().copied().sum();
    exps.into_iter().map(|e| e / sum).collect()
}

pub fn log_softmax<T: Scalar>(logits: &[T]) -> Vec<T> {
    let lse = log_sum_exp(logits);
    logits.iter().map(|&z| z - lse).collect()
}

/// `-ln probs[label]`.
pub fn cross_entropy<T: Scalar>(probs: &[T], label: usize) -> Result<T> {
    let p = *probs.get(label).ok_or(Error::Label {
        label,
        n_classes: probs.len(),
    })?;
    Ok(-p.ln())
}

/// Cross-entropy evaluated from logits in log space.
pub fn cross_entropy_from_logits<T: Scalar>(logits: &[T], label: usize) -> Result<T> {
    let z = *logits.get(label).ok_or(Error::Label {
        label,
        n_classes: logits.len(),
    })?;
    Ok(log_sum_exp(logits) - z)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn cross_entropy_examples() {
        assert_eq!(cross_entropy(&[0.0f64, 1.0, 0.0], 1).unwrap(), 0.0);
        let uniform = cross_entropy(&[0.25f64; 4], 2).unwrap();
        assert!((uniform - 4f64.ln()).abs() < 1e-15);
        assert!((uniform - 1.3863).abs() < 1e-4);
        let ce = cross_entropy(&[0.7f64, 0.3], 1).unwrap();
        assert!((ce - 1.2040).abs() < 1e-4);
        assert!(matches!(cross_entropy(&[0.5f64, 0.5], 2), Err(Error::Label { .. })));
        assert!(matches!(
            cross_entropy_from_logits(&[0.5f64, 0.5], 5),
            Err(Error::Label { .. })
        ));
    }

    #[test]
    fn logits_and_probability_routes_agree() {
        let logits = [0.3f64, -1.2, 2.5, 0.0];
        let p = softmax(&logits);
        for label in 0..4 {
            let a = cross_entropy(&p, label).unwrap();
            let b = cross_entropy_from_logits(&logits, label).unwrap();
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn huge_logits_stay_finite() {
        let p = softmax(&[1e4f64, -1e4, 0.0, 9999.0]);
        assert!(p.iter().all(|x| x.is_finite()));
        assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-6);
        let l = cross_entropy_from_logits(&[1e4f64, -1e4], 1).unwrap();
        assert!((l - 2e4).abs() < 1e-6);
    }

    proptest! {
        #[test]
        fn softmax_sums_to_one(logits in prop::collection::vec(-1e4f64..1e4, 1..12)) {
            let p = softmax(&logits);
            prop_assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-6);
            prop_assert!(p.iter().all(|&x| (0.0..=1.0).contains(&x)));
        }

        #[test]
        fn softmax_is_shift_invariant(logits in prop::collection::vec(-50f64..50.0, 1..8), c in -100f64..100.0) {
            let shifted: Vec<f64> = logits.iter().map(|z| z + c).collect();
            for (a, b) in softmax(&logits).iter().zip(softmax(&shifted)) {
                prop_assert!((a - b).abs() < 1e-9);
            }
        }
    }
}
