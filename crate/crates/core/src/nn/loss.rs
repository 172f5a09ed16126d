use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::tensor::DenseTensor;

/// Mean softmax cross-entropy over the batch.
///
/// Returns the loss and `d_logits = (softmax - onehot) / B`.
pub fn softmax_cross_entropy<T: Scalar>(logits: &DenseTensor<T>, labels: &[usize]) -> Result<(T, DenseTensor<T>)> {
    let (b, c) = logits.as_matrix_dims("softmax cross-entropy")?;
    if labels.len() != b {
        return Err(Error::dim(format!("{} labels for a batch of {b}", labels.len())));
    }
    if let Some(&bad) = labels.iter().find(|&&l| l >= c) {
        return Err(Error::arg(format!("label {bad} out of range for {c} classes")));
    }
    let inv_b = T::ONE / T::from_f64(b as f64);
    let mut grad = logits.clone();
    let mut loss = T::ZERO;
    for (row, &label) in grad.data_mut().chunks_mut(c).zip(labels) {
        let max = row.iter().copied().fold(row[0], T::max);
        let shifted_target = row[label] - max;
        let mut z = T::ZERO;
        for v in row.iter_mut() {
            *v = (*v - max).exp();
            z += *v;
        }
        loss += z.ln() - shifted_target;
        for v in row.iter_mut() {
            *v = *v / z * inv_b;
        }
        row[label] -= inv_b;
    }
    Ok((loss * inv_b, grad))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn uniform_logits_give_ln_c() {
        let logits = DenseTensor::<f64>::zeros(vec![3, 10]).unwrap();
        let (loss, _) = softmax_cross_entropy(&logits, &[0, 4, 9]).unwrap();
        assert!((loss - 10f64.ln()).abs() < 1e-15);
    }

    #[test]
    fn confident_prediction_has_zero_loss() {
        let logits = DenseTensor::from_vec(vec![1, 3], vec![0.0f64, 800.0, 0.0]).unwrap();
        let (loss, grad) = softmax_cross_entropy(&logits, &[1]).unwrap();
        assert!(loss.abs() < 1e-12);
        assert!(grad.max_abs() < 1e-12);
    }

    #[test]
    fn matches_naive_formula() {
        let logits = DenseTensor::from_vec(vec![2, 3], vec![0.3f64, -1.2, 2.0, 0.5, 0.1, -0.7]).unwrap();
        let labels = [2, 0];
        let (loss, grad) = softmax_cross_entropy(&logits, &labels).unwrap();
        let mut want = 0.0;
        for (b, &l) in labels.iter().enumerate() {
            let row: Vec<f64> = (0..3).map(|c| logits.get(&[b, c])).collect();
            let z: f64 = row.iter().map(|v| v.exp()).sum();
            want += -(row[l].exp() / z).ln();
            for (c, v) in row.iter().enumerate() {
                let p = v.exp() / z - if c == l { 1.0 } else { 0.0 };
                assert!((grad.get(&[b, c]) - p / 2.0).abs() < 1e-15);
            }
        }
        assert!((loss - want / 2.0).abs() < 1e-15);
    }

    #[test]
    fn label_out_of_range() {
        let logits = DenseTensor::<f64>::zeros(vec![1, 3]).unwrap();
        assert!(matches!(softmax_cross_entropy(&logits, &[3]), Err(Error::Argument(_))));
    }
}
