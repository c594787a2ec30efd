use super::{NumError, Result};

/// Max-subtracted softmax.
pub fn softmax(logits: &[f64]) -> Vec<f64> {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = logits.iter().map(|&z| (z - max).exp()).collect();
    let sum: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / sum).collect()
}

/// Returns `(−log p_target, p − onehot(target))`.
pub fn softmax_cross_entropy(logits: &[f64], target: usize) -> Result<(f64, Vec<f64>)> {
    if target >= logits.len() {
        return Err(NumError::BadTarget {
            target,
            width: logits.len(),
        });
    }
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let sum: f64 = logits.iter().map(|&z| (z - max).exp()).sum();
    let log_sum = sum.ln();
    // log-sum-exp form keeps the loss finite when p_target underflows
    let loss = -(logits[target] - max - log_sum);
    let mut grad = softmax(logits);
    grad[target] -= 1.0;
    Ok((loss, grad))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn uniform_logits_give_log_k() {
        let (loss, _) = softmax_cross_entropy(&[0.3; 4], 2).unwrap();
        assert!((loss - 4f64.ln()).abs() < 1e-12);
        assert!((loss - 1.3863).abs() < 1e-4);
    }

    #[test]
    fn large_logits_do_not_overflow() {
        let (loss, grad) = softmax_cross_entropy(&[1000.0, 0.0], 0).unwrap();
        assert!(loss.is_finite() && loss.abs() < 1e-12);
        assert!(grad.iter().all(|g| g.is_finite()));

        let (loss, _) = softmax_cross_entropy(&[1000.0, 0.0], 1).unwrap();
        assert!((loss - 1000.0).abs() < 1e-9);
    }

    #[test]
    fn gradient_sums_to_zero() {
        let (_, g) = softmax_cross_entropy(&[0.1, -2.0, 3.5, 0.7], 1).unwrap();
        assert!(g.iter().sum::<f64>().abs() < 1e-12);
    }

    #[test]
    fn bad_target_is_rejected() {
        assert_eq!(
            softmax_cross_entropy(&[0.0, 0.0], 2),
            Err(NumError::BadTarget { target: 2, width: 2 })
        );
    }

    #[test]
    fn softmax_is_a_simplex() {
        let p = softmax(&[5.0, -1.0, 0.0, 12.0]);
        assert!(p.iter().all(|&v| v >= 0.0));
        assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }
}
