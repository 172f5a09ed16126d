use crate::error::{Error, Result};
use crate::nn::Parameters;
use crate::scalar::Scalar;
use crate::tensor::DenseTensor;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BnMode {
    Train,
    Eval,
}

/// Per-feature batch normalization over `(B, F)` inputs.
#[derive(Debug, Clone, PartialEq)]
pub struct BatchNorm<T> {
    pub gamma: DenseTensor<T>,
    pub beta: DenseTensor<T>,
    pub running_mean: DenseTensor<T>,
    pub running_var: DenseTensor<T>,
    pub momentum: f64,
    pub epsilon: f64,
}

/// What the backward pass needs from a forward pass.
#[derive(Debug, Clone)]
pub struct BnCache<T> {
    mode: BnMode,
    x_hat: DenseTensor<T>,
    inv_std: Vec<T>,
    batch_mean: Vec<T>,
    batch_var: Vec<T>,
}

impl<T: Scalar> BatchNorm<T> {
    pub fn new(features: usize) -> Result<Self> {
        Ok(BatchNorm {
            gamma: DenseTensor::filled(vec![features], T::ONE)?,
            beta: DenseTensor::zeros(vec![features])?,
            running_mean: DenseTensor::zeros(vec![features])?,
            running_var: DenseTensor::filled(vec![features], T::ONE)?,
            momentum: 0.9,
            epsilon: 1e-5,
        })
    }

    pub fn features(&self) -> usize {
        self.gamma.len()
    }

    pub fn forward(&self, x: &DenseTensor<T>, mode: BnMode) -> Result<(DenseTensor<T>, BnCache<T>)> {
        let (b, f) = x.as_matrix_dims("batch norm")?;
        if f != self.features() {
            return Err(Error::dim(format!("batch norm has {} features, input is {}", self.features(), x.shape())));
        }
        if mode == BnMode::Train && b < 2 {
            return Err(Error::arg(format!("batch norm in train mode needs B >= 2, got {b}")));
        }
        let eps = T::from_f64(self.epsilon);
        let (mean, var) = match mode {
            BnMode::Train => {
                let inv_b = T::ONE / T::from_f64(b as f64);
                let mut mean = vec![T::ZERO; f];
                for row in x.data().chunks(f) {
                    for (m, &v) in mean.iter_mut().zip(row) {
                        *m += v;
                    }
                }
                mean.iter_mut().for_each(|m| *m *= inv_b);
                let mut var = vec![T::ZERO; f];
                for row in x.data().chunks(f) {
                    for ((s, &v), &m) in var.iter_mut().zip(row).zip(&mean) {
                        *s += (v - m) * (v - m);
                    }
                }
                var.iter_mut().for_each(|s| *s *= inv_b);
                (mean, var)
            }
            BnMode::Eval => (self.running_mean.data().to_vec(), self.running_var.data().to_vec()),
        };
        let inv_std: Vec<T> = var.iter().map(|&v| T::ONE / (v + eps).sqrt()).collect();
        let mut x_hat = x.clone();
        let mut y = x.clone();
        for (xr, yr) in x_hat.data_mut().chunks_mut(f).zip(y.data_mut().chunks_mut(f)) {
            for c in 0..f {
                let h = (xr[c] - mean[c]) * inv_std[c];
                xr[c] = h;
                yr[c] = self.gamma.data()[c] * h + self.beta.data()[c];
            }
        }
        y.ensure_finite("batch norm forward")?;
        Ok((
            y,
            BnCache {
                mode,
                x_hat,
                inv_std,
                batch_mean: mean,
                batch_var: var,
            },
        ))
    }

    /// Folds the batch statistics of a train-mode pass into the running estimates.
    pub fn update_running_stats(&mut self, cache: &BnCache<T>) {
        if cache.mode != BnMode::Train {
            return;
        }
        let m = T::from_f64(self.momentum);
        let one_m = T::ONE - m;
        for (r, &v) in self.running_mean.data_mut().iter_mut().zip(&cache.batch_mean) {
            *r = m * *r + one_m * v;
        }
        for (r, &v) in self.running_var.data_mut().iter_mut().zip(&cache.batch_var) {
            *r = m * *r + one_m * v;
        }
    }

    /// Returns `(d_input, d_gamma, d_beta)`.
    pub fn backward(
        &self,
        cache: &BnCache<T>,
        d_out: &DenseTensor<T>,
    ) -> Result<(DenseTensor<T>, DenseTensor<T>, DenseTensor<T>)> {
        d_out.expect_same_shape(&cache.x_hat, "batch norm backward")?;
        let (b, f) = d_out.as_matrix_dims("batch norm backward")?;
        let mut d_gamma = vec![T::ZERO; f];
        let mut d_beta = vec![T::ZERO; f];
        for (gr, hr) in d_out.data().chunks(f).zip(cache.x_hat.data().chunks(f)) {
            for c in 0..f {
                d_beta[c] += gr[c];
                d_gamma[c] += gr[c] * hr[c];
            }
        }
        let gamma = self.gamma.data();
        let mut dx = d_out.clone();
        match cache.mode {
            BnMode::Train => {
                // dx = gamma * inv_std / B * (B dy - sum(dy) - x_hat sum(dy x_hat))
                let nb = T::from_f64(b as f64);
                for (xr, hr) in dx.data_mut().chunks_mut(f).zip(cache.x_hat.data().chunks(f)) {
                    for c in 0..f {
                        let k = gamma[c] * cache.inv_std[c] / nb;
                        xr[c] = k * (nb * xr[c] - d_beta[c] - hr[c] * d_gamma[c]);
                    }
                }
            }
            BnMode::Eval => {
                for xr in dx.data_mut().chunks_mut(f) {
                    for c in 0..f {
                        xr[c] *= gamma[c] * cache.inv_std[c];
                    }
                }
            }
        }
        Ok((
            dx,
            DenseTensor::from_vec(vec![f], d_gamma)?,
            DenseTensor::from_vec(vec![f], d_beta)?,
        ))
    }
}

impl<T: Scalar> Parameters<T> for BatchNorm<T> {
    fn tensors(&self) -> Vec<&DenseTensor<T>> {
        vec![&self.gamma, &self.beta]
    }

    fn tensors_mut(&mut self) -> Vec<&mut DenseTensor<T>> {
        vec![&mut self.gamma, &mut self.beta]
    }

    fn tensor_names(&self) -> Vec<String> {
        vec!["gamma".into(), "beta".into()]
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::{seeded, uniform_tensor};

    #[test]
    fn constant_feature_maps_to_beta() {
        let mut bn = BatchNorm::<f64>::new(2).unwrap();
        bn.beta = DenseTensor::from_vec(vec![2], vec![0.5, -1.0]).unwrap();
        let x = DenseTensor::from_vec(vec![3, 2], vec![4.0, 1.0, 4.0, 2.0, 4.0, 3.0]).unwrap();
        let (y, _) = bn.forward(&x, BnMode::Train).unwrap();
        for row in y.data().chunks(2) {
            assert_eq!(row[0], 0.5);
        }
    }

    #[test]
    fn standardized_input_is_fixed_point() {
        let bn = BatchNorm::<f64>::new(1).unwrap();
        let x = DenseTensor::from_vec(vec![4, 1], vec![-1.0, 1.0, -1.0, 1.0]).unwrap();
        let (y, _) = bn.forward(&x, BnMode::Train).unwrap();
        for (a, b) in y.data().iter().zip(x.data()) {
            assert!((a - b).abs() < 1e-5);
        }
    }

    #[test]
    fn train_output_is_standardized() {
        let bn = BatchNorm::<f64>::new(5).unwrap();
        let x = uniform_tensor::<f64>(&mut seeded(3), &[16, 5], 3.0).unwrap();
        let (y, _) = bn.forward(&x, BnMode::Train).unwrap();
        for c in 0..5 {
            let col: Vec<f64> = (0..16).map(|b| y.get(&[b, c])).collect();
            let mean = col.iter().sum::<f64>() / 16.0;
            let var = col.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / 16.0;
            assert!(mean.abs() < 1e-6);
            assert!((var - 1.0).abs() < 1e-4);
        }
    }

    #[test]
    fn single_row_train_is_rejected() {
        let bn = BatchNorm::<f64>::new(2).unwrap();
        let x = DenseTensor::zeros(vec![1, 2]).unwrap();
        assert!(matches!(bn.forward(&x, BnMode::Train), Err(Error::Argument(_))));
        assert!(bn.forward(&x, BnMode::Eval).is_ok());
    }

    #[test]
    fn running_stats_use_momentum() {
        let mut bn = BatchNorm::<f64>::new(1).unwrap();
        let x = DenseTensor::from_vec(vec![2, 1], vec![1.0, 3.0]).unwrap();
        let (_, cache) = bn.forward(&x, BnMode::Train).unwrap();
        bn.update_running_stats(&cache);
        assert!((bn.running_mean.data()[0] - 0.2).abs() < 1e-15);
        assert!((bn.running_var.data()[0] - (0.9 + 0.1)).abs() < 1e-15);
    }
}
