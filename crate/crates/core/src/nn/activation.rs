use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::scalar::Scalar;
use crate::tensor::DenseTensor;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    Relu,
    Sigmoid,
    Tanh,
}

pub(crate) fn sigmoid<T: Scalar>(x: T) -> T {
    if x >= T::ZERO {
        T::ONE / (T::ONE + (-x).exp())
    } else {
        let e = x.exp();
        e / (T::ONE + e)
    }
}

impl Activation {
    pub fn apply<T: Scalar>(self, x: T) -> T {
        match self {
            Activation::Relu => {
                if x > T::ZERO {
                    x
                } else {
                    T::ZERO
                }
            }
            Activation::Sigmoid => sigmoid(x),
            Activation::Tanh => x.tanh(),
        }
    }

    /// Derivative at pre-activation `x`. ReLU uses 0 at `x == 0`.
    pub fn derivative<T: Scalar>(self, x: T) -> T {
        match self {
            Activation::Relu => {
                if x > T::ZERO {
                    T::ONE
                } else {
                    T::ZERO
                }
            }
            Activation::Sigmoid => {
                let s = sigmoid(x);
                s * (T::ONE - s)
            }
            Activation::Tanh => {
                let t = x.tanh();
                T::ONE - t * t
            }
        }
    }

    pub fn forward<T: Scalar>(self, x: &DenseTensor<T>) -> DenseTensor<T> {
        x.map(|v| self.apply(v))
    }

    /// Upstream gradient times the elementwise derivative at `x`.
    pub fn backward<T: Scalar>(self, x: &DenseTensor<T>, d_out: &DenseTensor<T>) -> Result<DenseTensor<T>> {
        x.zip_map(d_out, |v, g| g * self.derivative(v))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fixed_points() {
        assert_eq!(Activation::Sigmoid.apply(0.0f64), 0.5);
        assert_eq!(Activation::Tanh.apply(0.0f64), 0.0);
        assert_eq!(Activation::Relu.apply(-2.0f64), 0.0);
    }

    #[test]
    fn relu_derivative() {
        let x = DenseTensor::from_vec(vec![3], vec![-1.0f64, 0.0, 2.0]).unwrap();
        let g = DenseTensor::from_vec(vec![3], vec![5.0, 5.0, 5.0]).unwrap();
        assert_eq!(Activation::Relu.backward(&x, &g).unwrap().data(), &[0.0, 0.0, 5.0]);
    }

    #[test]
    fn sigmoid_is_stable_at_extremes() {
        assert_eq!(Activation::Sigmoid.apply(-1000.0f64), 0.0);
        assert_eq!(Activation::Sigmoid.apply(1000.0f64), 1.0);
        assert!(Activation::Sigmoid.derivative(-800.0f32).is_finite());
    }
}
