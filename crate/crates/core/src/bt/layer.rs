use crate::bt::config::BtConfig;
use crate::error::{Error, Result};
use crate::rng::{uniform_tensor, Pcg32};
use crate::scalar::Scalar;
use crate::tensor::{contract, outer, DenseTensor};

/// Default cap on `J * I` for [`BtLayer::reconstruct`].
pub const RECONSTRUCT_CAP: usize = 1 << 24;

/// Learnable block-term decomposition of a `J x I` weight matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct BtParams<T> {
    /// One core per block, shape `(R, .., R)`.
    pub cores: Vec<DenseTensor<T>>,
    /// `factors[n][k]` has shape `(I_k, J_k, R)`.
    pub factors: Vec<Vec<DenseTensor<T>>>,
    pub bias: Option<DenseTensor<T>>,
}

impl<T: Scalar> BtParams<T> {
    /// Cores, then factors block-major, then bias.
    pub fn tensors(&self) -> Vec<&DenseTensor<T>> {
        let mut out: Vec<&DenseTensor<T>> = self.cores.iter().collect();
        out.extend(self.factors.iter().flatten());
        out.extend(self.bias.iter());
        out
    }

    pub fn tensors_mut(&mut self) -> Vec<&mut DenseTensor<T>> {
        let mut out: Vec<&mut DenseTensor<T>> = self.cores.iter_mut().collect();
        out.extend(self.factors.iter_mut().flatten());
        out.extend(self.bias.iter_mut());
        out
    }

    pub fn tensor_names(&self) -> Vec<String> {
        let mut out: Vec<String> = (0..self.cores.len()).map(|n| format!("core{n}")).collect();
        for (n, fs) in self.factors.iter().enumerate() {
            out.extend((0..fs.len()).map(|k| format!("factor{n}_{k}")));
        }
        if self.bias.is_some() {
            out.push("bias".into());
        }
        out
    }

    pub fn scalar_count(&self) -> usize {
        self.tensors().iter().map(|t| t.len()).sum()
    }
}

/// Gradients of a block-term layer; shapes mirror [`BtParams`] and the input.
#[derive(Debug, Clone, PartialEq)]
pub struct BtGradients<T> {
    pub d_cores: Vec<DenseTensor<T>>,
    pub d_factors: Vec<Vec<DenseTensor<T>>>,
    pub d_input: DenseTensor<T>,
    pub d_bias: Option<DenseTensor<T>>,
}

impl<T: Scalar> BtGradients<T> {
    /// Parameter gradients in [`BtParams::tensors`] order.
    pub fn into_param_grads(self) -> Vec<DenseTensor<T>> {
        let mut out = self.d_cores;
        out.extend(self.d_factors.into_iter().flatten());
        out.extend(self.d_bias);
        out
    }
}

/// A linear layer `y = W x + b` whose `W` is stored in block-term form.
#[derive(Debug, Clone, PartialEq)]
pub struct BtLayer<T> {
    config: BtConfig,
    params: BtParams<T>,
}

impl<T: Scalar> BtLayer<T> {
    pub fn from_params(config: BtConfig, params: BtParams<T>) -> Result<Self> {
        let (n, d) = (config.cp_rank(), config.order());
        if params.cores.len() != n || params.factors.len() != n {
            return Err(Error::dim(format!(
                "expected {n} cores and factor groups, got {} and {}",
                params.cores.len(),
                params.factors.len()
            )));
        }
        let core_dims = config.core_dims();
        for (i, c) in params.cores.iter().enumerate() {
            if c.dims() != core_dims.as_slice() {
                return Err(Error::dim(format!("core {i} has shape {}, expected {core_dims:?}", c.shape())));
            }
        }
        for (i, fs) in params.factors.iter().enumerate() {
            if fs.len() != d {
                return Err(Error::dim(format!("block {i} has {} factors, expected {d}", fs.len())));
            }
            for (k, f) in fs.iter().enumerate() {
                let want = config.factor_dims(k);
                if f.dims() != want {
                    return Err(Error::dim(format!(
                        "factor ({i},{k}) has shape {}, expected {want:?}",
                        f.shape()
                    )));
                }
            }
        }
        match (&params.bias, config.use_bias()) {
            (Some(b), true) if b.dims() == [config.out_size()] => {}
            (None, false) => {}
            _ => {
                return Err(Error::dim(format!(
                    "bias presence/shape does not match config {config}"
                )))
            }
        }
        Ok(BtLayer { config, params })
    }

    /// Uniform initialization scaled so the reconstructed `W` has roughly the
    /// variance of a Glorot-uniform dense init, `2 / (I + J)`.
    ///
    /// Each entry of `W` sums `N R^d` products of `d + 1` independent
    /// uniforms, so every factor and core uses per-entry variance
    /// `v = (2 / ((I + J) N R^d))^(1 / (d + 1))`, i.e. bound `sqrt(3 v)`.
    pub fn init(config: BtConfig, rng: &mut Pcg32) -> Result<Self> {
        let bound = Self::init_bound(&config);
        let mut cores = Vec::with_capacity(config.cp_rank());
        let mut factors = Vec::with_capacity(config.cp_rank());
        for _ in 0..config.cp_rank() {
            let mut fs = Vec::with_capacity(config.order());
            for k in 0..config.order() {
                fs.push(uniform_tensor(rng, &config.factor_dims(k), bound)?);
            }
            factors.push(fs);
            cores.push(uniform_tensor(rng, &config.core_dims(), bound)?);
        }
        let bias = if config.use_bias() {
            Some(DenseTensor::zeros(vec![config.out_size()])?)
        } else {
            None
        };
        Ok(BtLayer {
            params: BtParams { cores, factors, bias },
            config,
        })
    }

    pub fn init_bound(config: &BtConfig) -> f64 {
        let (i, j) = (config.in_size() as f64, config.out_size() as f64);
        let d = config.order() as f64;
        let terms = config.cp_rank() as f64 * (config.tucker_rank() as f64).powf(d);
        let v = (2.0 / ((i + j) * terms)).powf(1.0 / (d + 1.0));
        (3.0 * v).sqrt()
    }

    pub fn config(&self) -> &BtConfig {
        &self.config
    }

    pub fn params(&self) -> &BtParams<T> {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut BtParams<T> {
        &mut self.params
    }

    fn check_input(&self, x: &DenseTensor<T>) -> Result<usize> {
        match x.dims() {
            &[b, i] if i == self.config.in_size() => Ok(b),
            _ => Err(Error::dim(format!(
                "BT layer expects input (B, {}), got {}",
                self.config.in_size(),
                x.shape()
            ))),
        }
    }

    fn batched_dims(batch: usize, modes: &[usize]) -> Vec<usize> {
        let mut dims = Vec::with_capacity(modes.len() + 1);
        dims.push(batch);
        dims.extend_from_slice(modes);
        dims
    }

    /// `X •_1 A^(1) • .. •_d A^(d)` for one block, keeping every intermediate.
    ///
    /// After step `k` the modes are `(B, I_{k+1}, .., I_d, J_1, R, .., J_k, R)`.
    fn factor_chain(&self, x: &DenseTensor<T>, block: usize) -> Result<Vec<DenseTensor<T>>> {
        let mut chain = Vec::with_capacity(self.config.order() + 1);
        chain.push(x.clone());
        for factor in &self.params.factors[block] {
            let next = contract(chain.last().expect("non-empty"), factor, &[1], &[0])?;
            chain.push(next);
        }
        Ok(chain)
    }

    /// Axes of the fully factor-contracted intermediate holding `J_1..J_d`
    /// (odd positions) and `R_1..R_d` (even positions after the batch mode).
    fn out_axes(d: usize) -> Vec<usize> {
        (0..d).map(|k| 1 + 2 * k).collect()
    }

    fn rank_axes(d: usize) -> Vec<usize> {
        (0..d).map(|k| 2 + 2 * k).collect()
    }

    /// Batched forward pass: `x` is `(B, I)`, the result is `(B, J)`.
    pub fn forward(&self, x: &DenseTensor<T>) -> Result<DenseTensor<T>> {
        let batch = self.check_input(x)?;
        let d = self.config.order();
        let xt = x.clone().reshape(Self::batched_dims(batch, self.config.in_modes().dims()))?;
        let core_axes: Vec<usize> = (0..d).collect();
        let mut y: Option<DenseTensor<T>> = None;
        for n in 0..self.config.cp_rank() {
            let mut t = xt.clone();
            for factor in &self.params.factors[n] {
                t = contract(&t, factor, &[1], &[0])?;
            }
            let yn = contract(&t, &self.params.cores[n], &Self::rank_axes(d), &core_axes)?;
            match y.as_mut() {
                Some(acc) => acc.add_assign(&yn)?,
                None => y = Some(yn),
            }
        }
        let mut y = y.expect("cp_rank >= 1").reshape(vec![batch, self.config.out_size()])?;
        if let Some(bias) = &self.params.bias {
            add_row_bias(&mut y, bias);
        }
        y.ensure_finite("BT forward")?;
        Ok(y)
    }

    /// Gradients of `<d_out, forward(x)>`: parameter gradients summed over
    /// the batch, input gradient per sample.
    pub fn backward(&self, x: &DenseTensor<T>, d_out: &DenseTensor<T>) -> Result<BtGradients<T>> {
        let batch = self.check_input(x)?;
        let j = self.config.out_size();
        if d_out.dims() != [batch, j] {
            return Err(Error::dim(format!(
                "upstream gradient must be ({batch}, {j}), got {}",
                d_out.shape()
            )));
        }
        let d = self.config.order();
        let xt = x.clone().reshape(Self::batched_dims(batch, self.config.in_modes().dims()))?;
        let dy = d_out.clone().reshape(Self::batched_dims(batch, self.config.out_modes().dims()))?;

        // dZ is dY (x) G with the R modes interleaved after their J modes.
        let mut interleave = vec![0];
        for k in 0..d {
            interleave.push(1 + k);
            interleave.push(1 + d + k);
        }
        let mut dy_axes = vec![0];
        dy_axes.extend(1..=d);
        let mut z_axes = vec![0];
        z_axes.extend(Self::out_axes(d));

        let mut d_cores = Vec::with_capacity(self.config.cp_rank());
        let mut d_factors = Vec::with_capacity(self.config.cp_rank());
        let mut d_input: Option<DenseTensor<T>> = None;
        for n in 0..self.config.cp_rank() {
            let chain = self.factor_chain(&xt, n)?;
            let z = chain.last().expect("chain has d + 1 entries");
            d_cores.push(contract(z, &dy, &z_axes, &dy_axes)?);

            let mut dt = outer(&dy, &self.params.cores[n])?.permute(&interleave)?;
            let mut dfs = vec![None; d];
            for k in (0..d).rev() {
                let prev = &chain[k];
                let prev_axes: Vec<usize> = (0..prev.order()).filter(|&a| a != 1).collect();
                let dt_axes: Vec<usize> = (0..dt.order() - 2).collect();
                dfs[k] = Some(contract(prev, &dt, &prev_axes, &dt_axes)?);

                let last = dt.order() - 1;
                let back = contract(&dt, &self.params.factors[n][k], &[last - 1, last], &[1, 2])?;
                // move the recovered I_k mode from the back to position 1
                let o = back.order();
                let mut perm = vec![0, o - 1];
                perm.extend(1..o - 1);
                dt = back.permute(&perm)?;
            }
            d_factors.push(dfs.into_iter().map(|f| f.expect("filled")).collect());
            match d_input.as_mut() {
                Some(acc) => acc.add_assign(&dt)?,
                None => d_input = Some(dt),
            }
        }
        let d_input = d_input
            .expect("cp_rank >= 1")
            .reshape(vec![batch, self.config.in_size()])?;
        let d_bias = if self.config.use_bias() {
            Some(column_sums(d_out)?)
        } else {
            None
        };
        Ok(BtGradients {
            d_cores,
            d_factors,
            d_input,
            d_bias,
        })
    }

    /// Materializes the dense `(J, I)` weight matrix, both index groups
    /// flattened row-major. Intended as a test oracle only.
    pub fn reconstruct(&self) -> Result<DenseTensor<T>> {
        self.reconstruct_with_cap(RECONSTRUCT_CAP)
    }

    pub fn reconstruct_with_cap(&self, cap: usize) -> Result<DenseTensor<T>> {
        let (i, j) = (self.config.in_size(), self.config.out_size());
        let requested = i.saturating_mul(j);
        if requested > cap {
            return Err(Error::Capacity { requested, cap });
        }
        let d = self.config.order();
        let mut w: Option<DenseTensor<T>> = None;
        for n in 0..self.config.cp_rank() {
            // Core-first: peel one R mode per step, appending (I_k, J_k).
            let mut t = self.params.cores[n].clone();
            for factor in &self.params.factors[n] {
                t = contract(&t, factor, &[0], &[2])?;
            }
            // t is (I_1, J_1, .., I_d, J_d); regroup as (J_1..J_d, I_1..I_d)
            let perm: Vec<usize> = (0..d).map(|k| 2 * k + 1).chain((0..d).map(|k| 2 * k)).collect();
            let wn = t.permute(&perm)?;
            match w.as_mut() {
                Some(acc) => acc.add_assign(&wn)?,
                None => w = Some(wn),
            }
        }
        w.expect("cp_rank >= 1").reshape(vec![j, i])
    }
}

pub(crate) fn add_row_bias<T: Scalar>(y: &mut DenseTensor<T>, bias: &DenseTensor<T>) {
    let w = bias.len();
    for row in y.data_mut().chunks_mut(w) {
        for (v, &b) in row.iter_mut().zip(bias.data()) {
            *v += b;
        }
    }
}

pub(crate) fn column_sums<T: Scalar>(m: &DenseTensor<T>) -> Result<DenseTensor<T>> {
    let (_, w) = m.as_matrix_dims("column_sums")?;
    let mut out = vec![T::ZERO; w];
    for row in m.data().chunks(w) {
        for (acc, &v) in out.iter_mut().zip(row) {
            *acc += v;
        }
    }
    DenseTensor::from_vec(vec![w], out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bt::config::bt_param_count;
    use crate::rng::seeded;

    fn layer(in_m: &[usize], out_m: &[usize], n: usize, r: usize, bias: bool, seed: u64) -> BtLayer<f64> {
        let cfg = BtConfig::new(in_m.to_vec(), out_m.to_vec(), n, r, bias).unwrap();
        let mut l = BtLayer::init(cfg, &mut seeded(seed)).unwrap();
        if let Some(b) = l.params_mut().bias.as_mut() {
            for (i, v) in b.data_mut().iter_mut().enumerate() {
                *v = 0.1 * i as f64 - 0.3;
            }
        }
        l
    }

    /// W[j, i] straight from the defining sum, no contractions.
    fn brute_force_w(l: &BtLayer<f64>) -> Vec<f64> {
        let cfg = l.config();
        let (im, jm, r, d) = (cfg.in_modes().dims(), cfg.out_modes().dims(), cfg.tucker_rank(), cfg.order());
        let (isz, jsz) = (cfg.in_size(), cfg.out_size());
        let unravel = |mut flat: usize, dims: &[usize]| {
            let mut idx = vec![0; dims.len()];
            for k in (0..dims.len()).rev() {
                idx[k] = flat % dims[k];
                flat /= dims[k];
            }
            idx
        };
        let mut w = vec![0.0; isz * jsz];
        for jf in 0..jsz {
            let jj = unravel(jf, jm);
            for i_f in 0..isz {
                let ii = unravel(i_f, im);
                let mut s = 0.0;
                for n in 0..cfg.cp_rank() {
                    for rf in 0..r.pow(d as u32) {
                        let rr = unravel(rf, &vec![r; d]);
                        let mut p = l.params().cores[n].get(&rr);
                        for k in 0..d {
                            p *= l.params().factors[n][k].get(&[ii[k], jj[k], rr[k]]);
                        }
                        s += p;
                    }
                }
                w[jf * isz + i_f] = s;
            }
        }
        w
    }

    #[test]
    fn init_is_deterministic_and_counts_match() {
        let cfg = BtConfig::new(vec![3], vec![2], 1, 1, false).unwrap();
        let a = BtLayer::<f64>::init(cfg.clone(), &mut seeded(7)).unwrap();
        let b = BtLayer::<f64>::init(cfg.clone(), &mut seeded(7)).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.params().scalar_count(), 7);
        assert_eq!(a.params().cores[0].dims(), &[1]);
        assert_eq!(a.params().factors[0][0].dims(), &[3, 2, 1]);

        let l = layer(&[5, 5, 8, 4], &[5, 5, 5, 4], 1, 2, true, 1);
        let count = bt_param_count(l.config()).unwrap() as usize;
        assert_eq!(l.params().scalar_count(), count + 500);
    }

    #[test]
    fn reconstruct_matches_defining_sum() {
        for (seed, (im, jm, n, r)) in [
            (&[2usize, 3][..], &[3usize, 2][..], 2, 2),
            (&[2, 2, 3][..], &[3, 2, 2][..], 3, 2),
            (&[4][..], &[3][..], 2, 3),
        ]
        .into_iter()
        .enumerate()
        {
            let l = layer(im, jm, n, r, false, seed as u64);
            let w = l.reconstruct().unwrap();
            let bf = brute_force_w(&l);
            for (a, b) in w.data().iter().zip(&bf) {
                assert!((a - b).abs() <= 1e-12 * (1.0 + b.abs()), "{a} vs {b}");
            }
        }
    }

    #[test]
    fn reconstruct_all_ones() {
        let cfg = BtConfig::new(vec![2, 3], vec![2, 2], 1, 1, false).unwrap();
        let mut l = BtLayer::<f64>::init(cfg, &mut seeded(0)).unwrap();
        for t in l.params_mut().tensors_mut() {
            t.data_mut().iter_mut().for_each(|v| *v = 1.0);
        }
        let w = l.reconstruct().unwrap();
        assert_eq!(w.dims(), &[4, 6]);
        assert!(w.data().iter().all(|&v| v == 1.0));
    }

    #[test]
    fn reconstruct_cap() {
        let l = layer(&[4, 4], &[4, 4], 1, 2, false, 0);
        assert!(matches!(l.reconstruct_with_cap(100), Err(Error::Capacity { requested: 256, cap: 100 })));
    }

    #[test]
    fn forward_matches_dense_matvec() {
        let l = layer(&[2, 3], &[3, 2], 2, 2, true, 3);
        let x = uniform_tensor::<f64>(&mut seeded(99), &[4, 6], 1.0).unwrap();
        let y = l.forward(&x).unwrap();
        let w = brute_force_w(&l);
        let b = l.params().bias.as_ref().unwrap();
        for bi in 0..4 {
            for j in 0..6 {
                let want: f64 = (0..6).map(|i| w[j * 6 + i] * x.get(&[bi, i])).sum::<f64>() + b.data()[j];
                assert!((y.get(&[bi, j]) - want).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn forward_zero_input_gives_bias() {
        let l = layer(&[2, 3], &[3, 2], 2, 2, true, 3);
        let y = l.forward(&DenseTensor::zeros(vec![2, 6]).unwrap()).unwrap();
        for row in y.data().chunks(6) {
            assert_eq!(row, l.params().bias.as_ref().unwrap().data());
        }
    }

    #[test]
    fn forward_rejects_bad_width() {
        let l = layer(&[2, 3], &[3, 2], 1, 1, false, 0);
        let err = l.forward(&DenseTensor::zeros(vec![2, 5]).unwrap()).unwrap_err();
        assert!(matches!(err, Error::Dimension(_)));
    }

    #[test]
    fn d1_falls_back_to_dense() {
        let l = layer(&[5], &[4], 1, 3, false, 11);
        let w = l.reconstruct().unwrap();
        let (g, a) = (&l.params().cores[0], &l.params().factors[0][0]);
        for j in 0..4 {
            for i in 0..5 {
                let want: f64 = (0..3).map(|r| g.data()[r] * a.get(&[i, j, r])).sum();
                assert!((w.get(&[j, i]) - want).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn backward_zero_upstream() {
        let l = layer(&[2, 3], &[3, 2], 2, 2, true, 5);
        let x = uniform_tensor::<f64>(&mut seeded(1), &[3, 6], 1.0).unwrap();
        let g = l.backward(&x, &DenseTensor::zeros(vec![3, 6]).unwrap()).unwrap();
        assert!(g.d_input.data().iter().all(|&v| v == 0.0));
        for t in g.into_param_grads() {
            assert!(t.data().iter().all(|&v| v == 0.0));
        }
    }

    #[test]
    fn bias_gradient_is_column_sum() {
        let l = layer(&[2, 2], &[2, 2], 1, 1, true, 5);
        let x = uniform_tensor::<f64>(&mut seeded(1), &[3, 4], 1.0).unwrap();
        let dy = uniform_tensor::<f64>(&mut seeded(2), &[3, 4], 1.0).unwrap();
        let g = l.backward(&x, &dy).unwrap();
        let db = g.d_bias.unwrap();
        for j in 0..4 {
            let want: f64 = (0..3).map(|b| dy.get(&[b, j])).sum();
            assert!((db.data()[j] - want).abs() < 1e-15);
        }
    }

    #[test]
    fn backward_shapes_mirror_params() {
        let l = layer(&[2, 3, 2], &[2, 2, 3], 2, 2, true, 8);
        let x = uniform_tensor::<f64>(&mut seeded(1), &[2, 12], 1.0).unwrap();
        let dy = uniform_tensor::<f64>(&mut seeded(2), &[2, 12], 1.0).unwrap();
        let g = l.backward(&x, &dy).unwrap();
        assert_eq!(g.d_input.dims(), x.dims());
        let grads = g.into_param_grads();
        let params = l.params().tensors();
        assert_eq!(grads.len(), params.len());
        for (g, p) in grads.iter().zip(params) {
            assert_eq!(g.dims(), p.dims());
        }
    }

    #[test]
    fn from_params_validates_shapes() {
        let l = layer(&[2, 3], &[3, 2], 2, 2, true, 3);
        let mut p = l.params().clone();
        p.cores.pop();
        assert!(BtLayer::from_params(l.config().clone(), p).is_err());
        assert!(BtLayer::from_params(l.config().clone(), l.params().clone()).is_ok());
    }
}
