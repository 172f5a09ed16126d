use crate::bt::{add_row_bias, column_sums};
use crate::error::{Error, Result};
use crate::nn::Parameters;
use crate::rng::{uniform_tensor, Pcg32};
use crate::scalar::Scalar;
use crate::tensor::{contract, DenseTensor};

/// Fully-connected layer `y = x W^T + b` with `W` of shape `(J, I)`.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseLayer<T> {
    pub weight: DenseTensor<T>,
    pub bias: DenseTensor<T>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DenseGradients<T> {
    pub d_weight: DenseTensor<T>,
    pub d_bias: DenseTensor<T>,
    pub d_input: DenseTensor<T>,
}

impl<T: Scalar> DenseLayer<T> {
    pub fn new(weight: DenseTensor<T>, bias: DenseTensor<T>) -> Result<Self> {
        let (j, _) = weight.as_matrix_dims("dense weight")?;
        if bias.dims() != [j] {
            return Err(Error::dim(format!(
                "bias of shape {} does not match weight {}",
                bias.shape(),
                weight.shape()
            )));
        }
        Ok(DenseLayer { weight, bias })
    }

    /// Glorot-uniform weights, zero bias.
    pub fn init(fan_in: usize, fan_out: usize, rng: &mut Pcg32) -> Result<Self> {
        let bound = (6.0 / (fan_in + fan_out) as f64).sqrt();
        let weight = uniform_tensor(rng, &[fan_out, fan_in], bound)?;
        let bias = DenseTensor::zeros(vec![fan_out])?;
        Ok(DenseLayer { weight, bias })
    }

    pub fn in_features(&self) -> usize {
        self.weight.dims()[1]
    }

    pub fn out_features(&self) -> usize {
        self.weight.dims()[0]
    }

    fn check_input(&self, x: &DenseTensor<T>) -> Result<usize> {
        match x.dims() {
            &[b, i] if i == self.in_features() => Ok(b),
            _ => Err(Error::dim(format!(
                "dense layer expects input (B, {}), got {}",
                self.in_features(),
                x.shape()
            ))),
        }
    }

    pub fn forward(&self, x: &DenseTensor<T>) -> Result<DenseTensor<T>> {
        self.check_input(x)?;
        let mut y = contract(x, &self.weight, &[1], &[1])?;
        add_row_bias(&mut y, &self.bias);
        y.ensure_finite("dense forward")?;
        Ok(y)
    }

    pub fn backward(&self, x: &DenseTensor<T>, d_out: &DenseTensor<T>) -> Result<DenseGradients<T>> {
        let b = self.check_input(x)?;
        if d_out.dims() != [b, self.out_features()] {
            return Err(Error::dim(format!(
                "upstream gradient must be ({b}, {}), got {}",
                self.out_features(),
                d_out.shape()
            )));
        }
        Ok(DenseGradients {
            d_weight: contract(d_out, x, &[0], &[0])?,
            d_bias: column_sums(d_out)?,
            d_input: contract(d_out, &self.weight, &[1], &[0])?,
        })
    }
}

impl<T: Scalar> Parameters<T> for DenseLayer<T> {
    fn tensors(&self) -> Vec<&DenseTensor<T>> {
        vec![&self.weight, &self.bias]
    }

    fn tensors_mut(&mut self) -> Vec<&mut DenseTensor<T>> {
        vec![&mut self.weight, &mut self.bias]
    }

    fn tensor_names(&self) -> Vec<String> {
        vec!["weight".into(), "bias".into()]
    }
}
