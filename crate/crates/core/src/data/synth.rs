use rand::Rng;

use crate::error::{Error, Result};
use crate::rng::Pcg32;
use crate::scalar::Scalar;
use crate::tensor::DenseTensor;

/// Delayed-recall task: the target at step `t` is the input symbol at `t - lag`.
#[derive(Debug, Clone, PartialEq)]
pub struct CopyBatch<T> {
    /// One-hot symbols, `(T, B, I)`.
    pub inputs: DenseTensor<T>,
    /// Symbol ids, step-major (`symbols[t * B + b]`).
    pub symbols: Vec<usize>,
    pub steps: usize,
    pub batch: usize,
    pub alphabet: usize,
    pub lag: usize,
}

impl<T: Scalar> CopyBatch<T> {
    /// Targets for step `t`, or `None` while `t < lag`.
    pub fn targets(&self, t: usize) -> Option<&[usize]> {
        (t >= self.lag && t < self.steps).then(|| {
            let s = (t - self.lag) * self.batch;
            &self.symbols[s..s + self.batch]
        })
    }

    pub fn scored_steps(&self) -> usize {
        self.steps - self.lag
    }
}

pub fn synth_copy_task<T: Scalar>(
    rng: &mut Pcg32,
    steps: usize,
    batch: usize,
    alphabet: usize,
    lag: usize,
) -> Result<CopyBatch<T>> {
    if lag == 0 || steps <= lag {
        return Err(Error::arg(format!("copy task needs T > lag >= 1, got T={steps}, lag={lag}")));
    }
    if batch == 0 || alphabet == 0 {
        return Err(Error::arg("copy task needs a positive batch and alphabet"));
    }
    let symbols: Vec<usize> = (0..steps * batch).map(|_| rng.random_range(0..alphabet)).collect();
    let mut data = vec![T::ZERO; steps * batch * alphabet];
    for (slot, &s) in symbols.iter().enumerate() {
        data[slot * alphabet + s] = T::ONE;
    }
    Ok(CopyBatch {
        inputs: DenseTensor::from_vec(vec![steps, batch, alphabet], data)?,
        symbols,
        steps,
        batch,
        alphabet,
        lag,
    })
}
