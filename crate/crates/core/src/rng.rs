//! Seeded PCG32 generator shared by initialization, shuffling and synthetic data.
//!
//! PCG32 here is the XSH-RR variant with 64-bit state (`rand_pcg::Pcg32`);
//! its full state serializes to two integers, which is what checkpoints store.

use rand::{Rng, SeedableRng};
pub use rand_pcg::Pcg32;

use crate::error::Result;
use crate::scalar::Scalar;
use crate::tensor::DenseTensor;

pub fn seeded(seed: u64) -> Pcg32 {
    Pcg32::seed_from_u64(seed)
}

/// Independent stream for (seed, stream) pairs, e.g. per-epoch shuffles.
pub fn stream(seed: u64, stream: u64) -> Pcg32 {
    Pcg32::new(seed, stream)
}

pub fn uniform_tensor<T: Scalar>(rng: &mut Pcg32, dims: &[usize], bound: f64) -> Result<DenseTensor<T>> {
    DenseTensor::from_fn(dims.to_vec(), |_| T::from_f64(rng.random_range(-bound..=bound)))
}

/// Fisher-Yates permutation of `0..n`.
pub fn permutation(rng: &mut Pcg32, n: usize) -> Vec<usize> {
    let mut p: Vec<usize> = (0..n).collect();
    for i in (1..n).rev() {
        let j = rng.random_range(0..=i);
        p.swap(i, j);
    }
    p
}
