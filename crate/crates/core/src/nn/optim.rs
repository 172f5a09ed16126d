use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::tensor::DenseTensor;

pub const MOMENTUM: f64 = 0.9;

/// Heavy-ball SGD: `v <- 0.9 v + g; p <- p - lr v`.
pub fn sgd_momentum_step<T: Scalar>(
    params: Vec<&mut DenseTensor<T>>,
    velocity: &mut [DenseTensor<T>],
    grads: &[DenseTensor<T>],
    lr: f64,
) -> Result<()> {
    if params.len() != velocity.len() || params.len() != grads.len() {
        return Err(Error::dim(format!(
            "{} parameters, {} velocity buffers, {} gradients",
            params.len(),
            velocity.len(),
            grads.len()
        )));
    }
    for (i, ((p, v), g)) in params.iter().zip(velocity.iter()).zip(grads).enumerate() {
        if p.shape() != v.shape() || p.shape() != g.shape() {
            return Err(Error::dim(format!(
                "parameter {i}: shape {} vs velocity {} vs gradient {}",
                p.shape(),
                v.shape(),
                g.shape()
            )));
        }
    }
    let (m, lr) = (T::from_f64(MOMENTUM), T::from_f64(lr));
    for ((p, v), g) in params.into_iter().zip(velocity.iter_mut()).zip(grads) {
        for ((pv, vv), &gv) in p.data_mut().iter_mut().zip(v.data_mut()).zip(g.data()) {
            *vv = m * *vv + gv;
            *pv -= lr * *vv;
        }
        p.ensure_finite("SGD update")?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn single(v: f64) -> DenseTensor<f64> {
        DenseTensor::from_vec(vec![1], vec![v]).unwrap()
    }

    #[test]
    fn zero_gradient_decays_velocity() {
        let mut p = single(2.0);
        let mut v = vec![single(1.0)];
        sgd_momentum_step(vec![&mut p], &mut v, &[single(0.0)], 0.1).unwrap();
        assert_eq!(v[0].data()[0], 0.9);
        assert!((p.data()[0] - (2.0 - 0.09)).abs() < 1e-15);
    }

    #[test]
    fn unit_gradient_two_steps() {
        let mut p = single(0.0);
        let mut v = vec![single(0.0)];
        sgd_momentum_step(vec![&mut p], &mut v, &[single(1.0)], 1.0).unwrap();
        assert_eq!(p.data()[0], -1.0);
        sgd_momentum_step(vec![&mut p], &mut v, &[single(1.0)], 1.0).unwrap();
        assert!((p.data()[0] - (-2.9)).abs() < 1e-15);
    }

    #[test]
    fn shape_mismatch() {
        let mut p = single(0.0);
        let mut v = vec![DenseTensor::zeros(vec![2]).unwrap()];
        assert!(sgd_momentum_step(vec![&mut p], &mut v, &[single(1.0)], 1.0).is_err());
    }
}
