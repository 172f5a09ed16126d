//! Dense row-major tensors and the pairwise contraction kernel.
//!
//! Every other module computes with [`DenseTensor`]. The layout is fixed to
//! row-major (last index fastest) so that [`DenseTensor::tensorize`] and
//! [`DenseTensor::vectorize`] are pure relabelings of the same buffer.

use std::cell::Cell;
use std::fmt;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Mode lengths of a tensor. Every mode is at least 1 and there is at least
/// one mode; scalars are represented as shape `(1,)`.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Shape(Vec<usize>);

impl Shape {
    pub fn new(dims: impl Into<Vec<usize>>) -> Result<Self> {
        let dims = dims.into();
        if dims.is_empty() {
            return Err(Error::arg("shape must have at least one mode"));
        }
        if let Some(pos) = dims.iter().position(|&d| d == 0) {
            return Err(Error::arg(format!("mode {pos} has length 0")));
        }
        checked_product(&dims).ok_or_else(|| Error::Overflow(format!("element count of {dims:?}")))?;
        Ok(Shape(dims))
    }

    pub fn scalar() -> Self {
        Shape(vec![1])
    }

    pub fn dims(&self) -> &[usize] {
        &self.0
    }

    pub fn order(&self) -> usize {
        self.0.len()
    }

    pub fn numel(&self) -> usize {
        self.0.iter().product()
    }

    /// Row-major strides in elements.
    pub fn strides(&self) -> Vec<usize> {
        let mut strides = vec![1; self.0.len()];
        for k in (0..self.0.len().saturating_sub(1)).rev() {
            strides[k] = strides[k + 1] * self.0[k + 1];
        }
        strides
    }

    /// Flat offset of a multi-index.
    pub fn offset(&self, index: &[usize]) -> usize {
        debug_assert_eq!(index.len(), self.0.len());
        index
            .iter()
            .zip(&self.0)
            .fold(0, |acc, (&i, &d)| {
                debug_assert!(i < d);
                acc * d + i
            })
    }
}

impl fmt::Display for Shape {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("(")?;
        for (i, d) in self.0.iter().enumerate() {
            if i > 0 {
                f.write_str(",")?;
            }
            write!(f, "{d}")?;
        }
        f.write_str(")")
    }
}

impl TryFrom<&[usize]> for Shape {
    type Error = Error;

    fn try_from(dims: &[usize]) -> Result<Self> {
        Shape::new(dims.to_vec())
    }
}

pub(crate) fn checked_product(dims: &[usize]) -> Option<usize> {
    dims.iter().try_fold(1usize, |acc, &d| acc.checked_mul(d))
}

thread_local! {
    static MAC_COUNT: Cell<u64> = const { Cell::new(0) };
}

/// Multiply-add counter fed by [`contract`] on the calling thread.
///
/// Used to check the analytical cost model against what the kernels actually
/// execute.
pub mod instrument {
    use super::MAC_COUNT;

    pub fn reset_mac_count() {
        MAC_COUNT.with(|c| c.set(0));
    }

    pub fn mac_count() -> u64 {
        MAC_COUNT.with(|c| c.get())
    }

    /// Runs `f` and returns its result together with the multiply-adds it issued.
    pub fn count_macs<R>(f: impl FnOnce() -> R) -> (R, u64) {
        let before = mac_count();
        let out = f();
        (out, mac_count() - before)
    }

    pub(super) fn add(n: u64) {
        MAC_COUNT.with(|c| c.set(c.get() + n));
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DenseTensor<T> {
    shape: Shape,
    data: Vec<T>,
}

impl<T: Scalar> DenseTensor<T> {
    pub fn from_vec(dims: impl Into<Vec<usize>>, data: Vec<T>) -> Result<Self> {
        let shape = Shape::new(dims)?;
        if shape.numel() != data.len() {
            return Err(Error::dim(format!(
                "shape {shape} needs {} elements, got {}",
                shape.numel(),
                data.len()
            )));
        }
        let t = DenseTensor { shape, data };
        t.ensure_finite("tensor construction")?;
        Ok(t)
    }

    pub fn zeros(dims: impl Into<Vec<usize>>) -> Result<Self> {
        let shape = Shape::new(dims)?;
        let data = vec![T::ZERO; shape.numel()];
        Ok(DenseTensor { shape, data })
    }

    pub fn filled(dims: impl Into<Vec<usize>>, value: T) -> Result<Self> {
        let shape = Shape::new(dims)?;
        let data = vec![value; shape.numel()];
        Ok(DenseTensor { shape, data })
    }

    pub fn scalar(value: T) -> Self {
        DenseTensor {
            shape: Shape::scalar(),
            data: vec![value],
        }
    }

    /// Builds a tensor by evaluating `f` at each flat row-major offset.
    pub fn from_fn(dims: impl Into<Vec<usize>>, f: impl FnMut(usize) -> T) -> Result<Self> {
        let shape = Shape::new(dims)?;
        let data: Vec<T> = (0..shape.numel()).map(f).collect();
        let t = DenseTensor { shape, data };
        t.ensure_finite("tensor construction")?;
        Ok(t)
    }

    pub(crate) fn from_parts_unchecked(shape: Shape, data: Vec<T>) -> Self {
        debug_assert_eq!(shape.numel(), data.len());
        DenseTensor { shape, data }
    }

    pub fn shape(&self) -> &Shape {
        &self.shape
    }

    pub fn dims(&self) -> &[usize] {
        self.shape.dims()
    }

    pub fn order(&self) -> usize {
        self.shape.order()
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn data(&self) -> &[T] {
        &self.data
    }

    /// Mutable access to the flat buffer. Callers that write non-finite
    /// values are expected to check with [`DenseTensor::ensure_finite`].
    pub fn data_mut(&mut self) -> &mut [T] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<T> {
        self.data
    }

    pub fn get(&self, index: &[usize]) -> T {
        self.data[self.shape.offset(index)]
    }

    pub fn ensure_finite(&self, op: &str) -> Result<()> {
        if self.data.iter().all(|v| v.is_finite()) {
            Ok(())
        } else {
            Err(Error::Numeric(op.to_string()))
        }
    }

    /// Reinterprets the buffer under a new shape with the same element count.
    pub fn reshape(self, dims: impl Into<Vec<usize>>) -> Result<Self> {
        let shape = Shape::new(dims)?;
        if shape.numel() != self.data.len() {
            return Err(Error::dim(format!(
                "cannot reshape {} elements into {shape} ({} elements)",
                self.data.len(),
                shape.numel()
            )));
        }
        Ok(DenseTensor {
            shape,
            data: self.data,
        })
    }

    /// Folds an order-1 tensor into `modes`, keeping the buffer untouched.
    pub fn tensorize(self, modes: &Shape) -> Result<Self> {
        if self.order() != 1 {
            return Err(Error::dim(format!(
                "tensorize expects an order-1 tensor, got shape {}",
                self.shape
            )));
        }
        if modes.numel() != self.data.len() {
            return Err(Error::dim(format!(
                "tensorize into {modes}: expected {} elements, got {}",
                modes.numel(),
                self.data.len()
            )));
        }
        Ok(DenseTensor {
            shape: modes.clone(),
            data: self.data,
        })
    }

    /// Unfolds into an order-1 tensor (row-major).
    pub fn vectorize(self) -> Self {
        let n = self.data.len();
        DenseTensor {
            shape: Shape(vec![n]),
            data: self.data,
        }
    }

    /// Axis permutation: output mode `k` is input mode `perm[k]`.
    pub fn permute(&self, perm: &[usize]) -> Result<Self> {
        check_permutation(perm, self.order())?;
        if perm.iter().enumerate().all(|(k, &p)| k == p) {
            return Ok(self.clone());
        }
        Ok(self.permute_unchecked(perm))
    }

    fn permute_unchecked(&self, perm: &[usize]) -> Self {
        let in_strides = self.shape.strides();
        let out_dims: Vec<usize> = perm.iter().map(|&p| self.shape.0[p]).collect();
        let src_strides: Vec<usize> = perm.iter().map(|&p| in_strides[p]).collect();
        let n = self.data.len();
        let order = out_dims.len();
        let mut out = Vec::with_capacity(n);
        let mut idx = vec![0usize; order];
        let mut src = 0usize;
        let last = order - 1;
        let (last_dim, last_stride) = (out_dims[last], src_strides[last]);
        while out.len() < n {
            // innermost mode as a tight loop
            let mut s = src;
            for _ in 0..last_dim {
                out.push(self.data[s]);
                s += last_stride;
            }
            // odometer over the outer modes
            let mut k = last;
            while k > 0 {
                k -= 1;
                idx[k] += 1;
                src += src_strides[k];
                if idx[k] < out_dims[k] {
                    break;
                }
                src -= src_strides[k] * out_dims[k];
                idx[k] = 0;
            }
        }
        DenseTensor {
            shape: Shape(out_dims),
            data: out,
        }
    }

    pub fn map(&self, f: impl Fn(T) -> T) -> Self {
        DenseTensor {
            shape: self.shape.clone(),
            data: self.data.iter().map(|&v| f(v)).collect(),
        }
    }

    pub fn zip_map(&self, other: &Self, f: impl Fn(T, T) -> T) -> Result<Self> {
        self.expect_same_shape(other, "zip_map")?;
        Ok(DenseTensor {
            shape: self.shape.clone(),
            data: self
                .data
                .iter()
                .zip(&other.data)
                .map(|(&a, &b)| f(a, b))
                .collect(),
        })
    }

    pub fn add_assign(&mut self, other: &Self) -> Result<()> {
        self.expect_same_shape(other, "add_assign")?;
        for (a, &b) in self.data.iter_mut().zip(&other.data) {
            *a += b;
        }
        Ok(())
    }

    pub fn scale(&self, s: T) -> Self {
        self.map(|v| v * s)
    }

    pub fn sum(&self) -> T {
        self.data.iter().copied().sum()
    }

    /// Frobenius inner product.
    pub fn dot(&self, other: &Self) -> Result<T> {
        self.expect_same_shape(other, "dot")?;
        Ok(self
            .data
            .iter()
            .zip(&other.data)
            .fold(T::ZERO, |acc, (&a, &b)| acc + a * b))
    }

    pub fn max_abs(&self) -> T {
        self.data
            .iter()
            .fold(T::ZERO, |acc, &v| acc.max(v.abs()))
    }

    pub fn expect_same_shape(&self, other: &Self, op: &str) -> Result<()> {
        if self.shape != other.shape {
            return Err(Error::dim(format!(
                "{op}: shapes {} and {} differ",
                self.shape, other.shape
            )));
        }
        Ok(())
    }

    /// Gathers rows of an order-2 tensor.
    pub fn select_rows(&self, rows: &[usize]) -> Result<Self> {
        let (n, w) = self.as_matrix_dims("select_rows")?;
        let mut data = Vec::with_capacity(rows.len() * w);
        for &r in rows {
            if r >= n {
                return Err(Error::arg(format!("row {r} out of range for {n} rows")));
            }
            data.extend_from_slice(&self.data[r * w..(r + 1) * w]);
        }
        DenseTensor::from_vec(vec![rows.len().max(1), w], data)
            .map_err(|_| Error::arg("select_rows needs at least one row"))
    }

    pub fn as_matrix_dims(&self, op: &str) -> Result<(usize, usize)> {
        match self.dims() {
            &[r, c] => Ok((r, c)),
            _ => Err(Error::dim(format!(
                "{op} expects an order-2 tensor, got shape {}",
                self.shape
            ))),
        }
    }

    pub fn cast<U: Scalar>(&self) -> DenseTensor<U> {
        DenseTensor {
            shape: self.shape.clone(),
            data: self.data.iter().map(|v| U::from_f64(v.to_f64())).collect(),
        }
    }
}

fn check_permutation(perm: &[usize], order: usize) -> Result<()> {
    if perm.len() != order {
        return Err(Error::arg(format!(
            "permutation {perm:?} has length {}, tensor has order {order}",
            perm.len()
        )));
    }
    let mut seen = vec![false; order];
    for &p in perm {
        if p >= order || std::mem::replace(&mut seen[p], true) {
            return Err(Error::arg(format!("{perm:?} is not a permutation of 0..{order}")));
        }
    }
    Ok(())
}

/// Inverse of an axis permutation.
pub fn inverse_permutation(perm: &[usize]) -> Vec<usize> {
    let mut inv = vec![0; perm.len()];
    for (k, &p) in perm.iter().enumerate() {
        inv[p] = k;
    }
    inv
}

/// Output row length from which the streaming (axpy) kernel is used.
const WIDE_ROW: usize = 8;
const PARALLEL_MAC_THRESHOLD: usize = 1 << 16;

/// Generalized pairwise contraction.
///
/// Sums over every matched index pair `(axes_a[i], axes_b[i])`. The output
/// modes are the remaining modes of `a` in order, followed by the remaining
/// modes of `b` in order; a full contraction yields shape `(1,)`.
///
/// Each output cell is accumulated sequentially over the matched indices in
/// row-major order of `axes_a`, so results do not depend on the thread count.
pub fn contract<T: Scalar>(
    a: &DenseTensor<T>,
    b: &DenseTensor<T>,
    axes_a: &[usize],
    axes_b: &[usize],
) -> Result<DenseTensor<T>> {
    if axes_a.is_empty() || axes_a.len() != axes_b.len() {
        return Err(Error::arg(format!(
            "contract needs equally many (>= 1) axes on both sides, got {axes_a:?} and {axes_b:?}"
        )));
    }
    check_axes(axes_a, a.order(), "a")?;
    check_axes(axes_b, b.order(), "b")?;
    for (&ia, &ib) in axes_a.iter().zip(axes_b) {
        if a.dims()[ia] != b.dims()[ib] {
            return Err(Error::dim(format!(
                "contracted axis pair (a:{ia}, b:{ib}) has lengths {} and {}",
                a.dims()[ia],
                b.dims()[ib]
            )));
        }
    }

    let free_a: Vec<usize> = (0..a.order()).filter(|k| !axes_a.contains(k)).collect();
    let free_b: Vec<usize> = (0..b.order()).filter(|k| !axes_b.contains(k)).collect();
    let m: usize = free_a.iter().map(|&k| a.dims()[k]).product();
    let n: usize = free_b.iter().map(|&k| b.dims()[k]).product();
    let kk: usize = axes_a.iter().map(|&k| a.dims()[k]).product();

    // a is laid out as (free, contracted); b as (contracted, free) when the
    // output rows are wide enough to stream over, else as (free, contracted)
    // for plain dot products. Either way each output cell accumulates its
    // kk products in index order, so both paths give identical bits.
    let perm_a: Vec<usize> = free_a.iter().chain(axes_a).copied().collect();
    let pa = permuted_data(a, &perm_a);
    let wide = n >= WIDE_ROW;
    let perm_b: Vec<usize> = if wide {
        axes_b.iter().chain(&free_b).copied().collect()
    } else {
        free_b.iter().chain(axes_b).copied().collect()
    };
    let pb = permuted_data(b, &perm_b);

    let mut out = vec![T::ZERO; m * n];
    let kernel = |(i, row): (usize, &mut [T])| {
        let ar = &pa[i * kk..(i + 1) * kk];
        if wide {
            for (k, &x) in ar.iter().enumerate() {
                let br = &pb[k * n..(k + 1) * n];
                for (cell, &y) in row.iter_mut().zip(br) {
                    *cell += x * y;
                }
            }
        } else {
            for (j, cell) in row.iter_mut().enumerate() {
                let br = &pb[j * kk..(j + 1) * kk];
                let mut acc = T::ZERO;
                for (&x, &y) in ar.iter().zip(br) {
                    acc += x * y;
                }
                *cell = acc;
            }
        }
    };
    if m * n * kk >= PARALLEL_MAC_THRESHOLD && m > 1 {
        out.par_chunks_mut(n).enumerate().for_each(kernel);
    } else {
        out.chunks_mut(n).enumerate().for_each(kernel);
    }
    instrument::add((m * n * kk) as u64);

    let mut dims: Vec<usize> = free_a
        .iter()
        .map(|&k| a.dims()[k])
        .chain(free_b.iter().map(|&k| b.dims()[k]))
        .collect();
    if dims.is_empty() {
        dims.push(1);
    }
    let t = DenseTensor::from_parts_unchecked(Shape(dims), out);
    t.ensure_finite("contract")?;
    Ok(t)
}

fn permuted_data<'a, T: Scalar>(t: &'a DenseTensor<T>, perm: &[usize]) -> std::borrow::Cow<'a, [T]> {
    if perm.iter().enumerate().all(|(k, &p)| k == p) {
        std::borrow::Cow::Borrowed(t.data())
    } else {
        std::borrow::Cow::Owned(t.permute_unchecked(perm).data)
    }
}

fn check_axes(axes: &[usize], order: usize, side: &str) -> Result<()> {
    for (i, &ax) in axes.iter().enumerate() {
        if ax >= order {
            return Err(Error::arg(format!(
                "axis {ax} out of range for operand {side} of order {order}"
            )));
        }
        if axes[..i].contains(&ax) {
            return Err(Error::arg(format!("duplicate axis {ax} on operand {side}")));
        }
    }
    Ok(())
}

/// Outer product, realized as a contraction over a unit-length mode so it
/// shares the kernel (and the instrumentation) with [`contract`].
pub fn outer<T: Scalar>(a: &DenseTensor<T>, b: &DenseTensor<T>) -> Result<DenseTensor<T>> {
    let mut da = a.dims().to_vec();
    da.push(1);
    let mut db = vec![1];
    db.extend_from_slice(b.dims());
    let a1 = DenseTensor::from_parts_unchecked(Shape(da), a.data.clone());
    let b1 = DenseTensor::from_parts_unchecked(Shape(db), b.data.clone());
    contract(&a1, &b1, &[a.order()], &[0])
}

#[cfg(test)]
mod tests {
    use super::*;

    fn seq(dims: &[usize]) -> DenseTensor<f64> {
        DenseTensor::from_fn(dims.to_vec(), |i| i as f64).unwrap()
    }

    #[test]
    fn wide_and_narrow_kernels_agree_bitwise() {
        let a = DenseTensor::from_fn(vec![3, 7], |i| ((i * 37 % 11) as f64 - 5.0) / 3.0).unwrap();
        let b = DenseTensor::from_fn(vec![7, 12], |i| ((i * 13 % 17) as f64 - 8.0) / 7.0).unwrap();
        let wide = contract(&a, &b, &[1], &[0]).unwrap();
        for j in 0..12 {
            let col = b.permute(&[1, 0]).unwrap().select_rows(&[j]).unwrap();
            let narrow = contract(&a, &col, &[1], &[1]).unwrap();
            for i in 0..3 {
                assert_eq!(narrow.data()[i].to_bits(), wide.data()[i * 12 + j].to_bits());
            }
        }
    }

    #[test]
    fn tensorize_row_major() {
        let v = seq(&[800]);
        let modes = Shape::new(vec![5, 5, 8, 4]).unwrap();
        let t = v.tensorize(&modes).unwrap();
        assert_eq!(t.dims(), &[5, 5, 8, 4]);
        assert_eq!(t.get(&[0, 0, 0, 1]), 1.0);
        assert_eq!(t.get(&[0, 0, 1, 0]), 4.0);
        assert_eq!(t.get(&[1, 0, 0, 0]), 160.0);
    }

    #[test]
    fn tensorize_singleton() {
        let v = DenseTensor::from_vec(vec![1], vec![7.0f64]).unwrap();
        let t = v.tensorize(&Shape::new(vec![1, 1, 1]).unwrap()).unwrap();
        assert_eq!(t.dims(), &[1, 1, 1]);
        assert_eq!(t.data(), &[7.0]);
    }

    #[test]
    fn tensorize_size_mismatch_names_counts() {
        let v = seq(&[10]);
        let err = v.tensorize(&Shape::new(vec![3, 4]).unwrap()).unwrap_err();
        let msg = err.to_string();
        assert!(matches!(err, Error::Dimension(_)));
        assert!(msg.contains("12") && msg.contains("10"), "{msg}");
    }

    #[test]
    fn vectorize_shapes() {
        let t = seq(&[5, 5, 5, 4]);
        assert_eq!(t.vectorize().dims(), &[500]);
        let s = DenseTensor::scalar(3.5f64).vectorize();
        assert_eq!(s.data(), &[3.5]);
    }

    #[test]
    fn shape_rejects_zero_and_empty() {
        assert!(Shape::new(vec![]).is_err());
        assert!(Shape::new(vec![3, 0]).is_err());
        assert!(matches!(
            Shape::new(vec![usize::MAX, 2]),
            Err(Error::Overflow(_))
        ));
    }

    #[test]
    fn non_finite_rejected() {
        let err = DenseTensor::from_vec(vec![2], vec![1.0, f64::NAN]).unwrap_err();
        assert!(matches!(err, Error::Numeric(_)));
    }

    #[test]
    fn permute_transpose() {
        let m = seq(&[2, 3]);
        let t = m.permute(&[1, 0]).unwrap();
        assert_eq!(t.dims(), &[3, 2]);
        assert_eq!(t.data(), &[0.0, 3.0, 1.0, 4.0, 2.0, 5.0]);
    }

    #[test]
    fn permute_identity_and_errors() {
        let t = seq(&[2, 3, 4]);
        assert_eq!(t.permute(&[0, 1, 2]).unwrap(), t);
        assert!(matches!(t.permute(&[0, 0, 1]), Err(Error::Argument(_))));
        assert!(matches!(t.permute(&[0, 1]), Err(Error::Argument(_))));
    }

    #[test]
    fn permute_matches_index_map() {
        let t = seq(&[2, 3, 4]);
        let p = t.permute(&[2, 0, 1]).unwrap();
        assert_eq!(p.dims(), &[4, 2, 3]);
        for i in 0..2 {
            for j in 0..3 {
                for k in 0..4 {
                    assert_eq!(p.get(&[k, i, j]), t.get(&[i, j, k]));
                }
            }
        }
        let back = p.permute(&inverse_permutation(&[2, 0, 1])).unwrap();
        assert_eq!(back, t);
    }

    #[test]
    fn contract_matrix_product() {
        let a = DenseTensor::from_vec(vec![2, 3], vec![1.0, 2.0, 3.0, 4.0, 5.0, 6.0]).unwrap();
        let b = DenseTensor::from_vec(vec![3, 2], vec![7.0, 8.0, 9.0, 10.0, 11.0, 12.0]).unwrap();
        let c = contract(&a, &b, &[1], &[0]).unwrap();
        assert_eq!(c.dims(), &[2, 2]);
        assert_eq!(c.data(), &[58.0, 64.0, 139.0, 154.0]);
    }

    #[test]
    fn contract_identity_reorders_axes() {
        let t = seq(&[2, 3, 4]);
        let eye = DenseTensor::from_fn(vec![3, 3], |i| if i / 3 == i % 3 { 1.0 } else { 0.0 }).unwrap();
        let c = contract(&t, &eye, &[1], &[0]).unwrap();
        assert_eq!(c, t.permute(&[0, 2, 1]).unwrap());
    }

    #[test]
    fn contract_full_gives_unit_shape() {
        let a = seq(&[2, 3]);
        let c = contract(&a, &a, &[0, 1], &[0, 1]).unwrap();
        assert_eq!(c.dims(), &[1]);
        assert_eq!(c.data()[0], (0..6).map(|i| (i * i) as f64).sum::<f64>());
    }

    #[test]
    fn contract_errors() {
        let a = seq(&[2, 3]);
        let b = seq(&[4, 2]);
        let err = contract(&a, &b, &[1], &[0]).unwrap_err();
        assert!(matches!(err, Error::Dimension(ref m) if m.contains("a:1") && m.contains("b:0")));
        assert!(matches!(contract(&a, &a, &[0, 0], &[0, 1]), Err(Error::Argument(_))));
        assert!(matches!(contract(&a, &a, &[], &[]), Err(Error::Argument(_))));
        assert!(matches!(contract(&a, &a, &[2], &[0]), Err(Error::Argument(_))));
    }

    #[test]
    fn contract_counts_macs() {
        let a = seq(&[2, 3, 4]);
        let b = seq(&[5, 3, 4]);
        let (_, macs) = instrument::count_macs(|| contract(&a, &b, &[1, 2], &[1, 2]).unwrap());
        assert_eq!(macs, 2 * 5 * 12);
    }

    #[test]
    fn outer_product() {
        let a = DenseTensor::from_vec(vec![2], vec![1.0, 2.0]).unwrap();
        let b = DenseTensor::from_vec(vec![3], vec![3.0, 4.0, 5.0]).unwrap();
        let c = outer(&a, &b).unwrap();
        assert_eq!(c.dims(), &[2, 3]);
        assert_eq!(c.data(), &[3.0, 4.0, 5.0, 6.0, 8.0, 10.0]);
    }
}
