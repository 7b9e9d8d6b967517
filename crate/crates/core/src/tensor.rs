//! Dense third-order tensors and the i-mode product.

use std::ops::{Add, Mul};

use num_traits::Zero;

use crate::linalg::Matrix;
use crate::{Error, Result};

/// `n1 x n2 x n3` array stored with the third index varying fastest.
#[derive(Debug, Clone, PartialEq)]
pub struct Tensor3<T> {
    dims: [usize; 3],
    data: Vec<T>,
}

impl<T> Tensor3<T> {
    pub fn new(dims: [usize; 3], data: Vec<T>) -> Result<Self> {
        let len: usize = dims.iter().product();
        if data.len() != len {
            return Err(Error::DimensionMismatch(format!(
                "{}x{}x{} tensor needs {len} samples, got {}",
                dims[0],
                dims[1],
                dims[2],
                data.len()
            )));
        }
        Ok(Self { dims, data })
    }

    pub fn from_fn(dims: [usize; 3], mut f: impl FnMut(usize, usize, usize) -> T) -> Self {
        let mut data = Vec::with_capacity(dims.iter().product());
        for i in 0..dims[0] {
            for j in 0..dims[1] {
                for k in 0..dims[2] {
                    data.push(f(i, j, k));
                }
            }
        }
        Self { dims, data }
    }

    pub fn dims(&self) -> [usize; 3] {
        self.dims
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

    pub fn data_mut(&mut self) -> &mut [T] {
        &mut self.data
    }

    pub fn into_vec(self) -> Vec<T> {
        self.data
    }

    #[inline]
    pub fn offset(&self, i: usize, j: usize, k: usize) -> usize {
        debug_assert!(i < self.dims[0] && j < self.dims[1] && k < self.dims[2]);
        (i * self.dims[1] + j) * self.dims[2] + k
    }

    /// Unflattens a linear offset into `(i, j, k)`.
    pub fn coords(&self, offset: usize) -> (usize, usize, usize) {
        let k = offset % self.dims[2];
        let rest = offset / self.dims[2];
        (rest / self.dims[1], rest % self.dims[1], k)
    }

    pub fn map<U>(&self, f: impl FnMut(&T) -> U) -> Tensor3<U> {
        Tensor3 {
            dims: self.dims,
            data: self.data.iter().map(f).collect(),
        }
    }
}

impl<T: Copy> Tensor3<T> {
    pub fn filled(dims: [usize; 3], value: T) -> Self {
        Self {
            dims,
            data: vec![value; dims.iter().product()],
        }
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize, k: usize) -> T {
        self.data[self.offset(i, j, k)]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, k: usize, v: T) {
        let o = self.offset(i, j, k);
        self.data[o] = v;
    }

    /// Dimension-shifting transpose `n1 x n2 x n3 -> n3 x n1 x n2`, i.e.
    /// `out[k][i][j] = self[i][j][k]`. Three shifts restore the original layout.
    pub fn shift_dims(&self) -> Self {
        let [n1, n2, n3] = self.dims;
        let mut data = Vec::with_capacity(self.data.len());
        for k in 0..n3 {
            for i in 0..n1 {
                for j in 0..n2 {
                    data.push(self.get(i, j, k));
                }
            }
        }
        Self {
            dims: [n3, n1, n2],
            data,
        }
    }

    pub fn zip_map<U: Copy, V>(&self, other: &Tensor3<U>, mut f: impl FnMut(T, U) -> V) -> Result<Tensor3<V>> {
        if self.dims != other.dims {
            return Err(Error::DimensionMismatch(format!("{:?} vs {:?}", self.dims, other.dims)));
        }
        Ok(Tensor3 {
            dims: self.dims,
            data: self.data.iter().zip(&other.data).map(|(&a, &b)| f(a, b)).collect(),
        })
    }
}

/// Contracts index `axis` (1, 2 or 3) of `t` against an `h x n_axis` matrix:
/// `b[.., h, ..] = sum_n a[.., n, ..] * m[h][n]`.
pub fn i_mode_product<T>(t: &Tensor3<T>, m: &Matrix<T>, axis: usize) -> Result<Tensor3<T>>
where
    T: Copy + Zero + Add<Output = T> + Mul<Output = T>,
{
    if !(1..=3).contains(&axis) {
        return Err(Error::DimensionMismatch(format!("axis must be 1, 2 or 3, got {axis}")));
    }
    let a = axis - 1;
    let dims = t.dims();
    if m.cols() != dims[a] {
        return Err(Error::DimensionMismatch(format!(
            "matrix has {} columns but axis {axis} has length {}",
            m.cols(),
            dims[a]
        )));
    }
    let mut out_dims = dims;
    out_dims[a] = m.rows();
    let strides = [dims[1] * dims[2], dims[2], 1];
    let out_strides = [out_dims[1] * out_dims[2], out_dims[2], 1];
    // the two free axes
    let (p, q) = match a {
        0 => (1, 2),
        1 => (0, 2),
        _ => (0, 1),
    };
    let mut out = vec![T::zero(); out_dims.iter().product()];
    let src = t.data();
    for u in 0..dims[p] {
        for v in 0..dims[q] {
            let base = u * strides[p] + v * strides[q];
            let out_base = u * out_strides[p] + v * out_strides[q];
            for h in 0..m.rows() {
                let row = m.row(h);
                let mut acc = T::zero();
                for (n, &w) in row.iter().enumerate() {
                    acc = acc + src[base + n * strides[a]] * w;
                }
                out[out_base + h * out_strides[a]] = acc;
            }
        }
    }
    Tensor3::new(out_dims, out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ramp(dims: [usize; 3]) -> Tensor3<f64> {
        Tensor3::from_fn(dims, |i, j, k| (i * 100 + j * 10 + k) as f64)
    }

    #[test]
    fn length_is_checked() {
        assert!(Tensor3::new([2, 2, 2], vec![0.0; 7]).is_err());
        let t = ramp([2, 3, 4]);
        assert_eq!(t.coords(t.offset(1, 2, 3)), (1, 2, 3));
    }

    #[test]
    fn identity_leaves_tensor_unchanged() {
        let t = ramp([3, 4, 5]);
        for axis in 1..=3 {
            let n = t.dims()[axis - 1];
            assert_eq!(i_mode_product(&t, &Matrix::identity(n), axis).unwrap(), t);
        }
    }

    #[test]
    fn butterfly_on_ones() {
        let t = Tensor3::filled([2, 2, 2], 1.0);
        let m = Matrix::from_fn(2, 2, |r, c| if r == 1 && c == 1 { -1.0 } else { 1.0 });
        let b = i_mode_product(&t, &m, 1).unwrap();
        for j in 0..2 {
            for k in 0..2 {
                assert_eq!(b.get(0, j, k), 2.0);
                assert_eq!(b.get(1, j, k), 0.0);
            }
        }
    }

    #[test]
    fn rectangular_matrix_changes_one_extent() {
        let t = ramp([2, 3, 4]);
        let m = Matrix::from_fn(5, 3, |r, c| (r + c) as f64);
        let b = i_mode_product(&t, &m, 2).unwrap();
        assert_eq!(b.dims(), [2, 5, 4]);
        let expect: f64 = (0..3).map(|n| t.get(1, n, 2) * (4 + n) as f64).sum();
        assert_eq!(b.get(1, 4, 2), expect);
    }

    #[test]
    fn mismatched_matrix_is_rejected() {
        let t = ramp([2, 3, 4]);
        assert!(matches!(
            i_mode_product(&t, &Matrix::<f64>::identity(3), 1),
            Err(Error::DimensionMismatch(_))
        ));
        assert!(i_mode_product(&t, &Matrix::<f64>::identity(2), 4).is_err());
    }

    #[test]
    fn three_shifts_restore_layout() {
        let t = ramp([2, 3, 4]);
        let once = t.shift_dims();
        assert_eq!(once.dims(), [4, 2, 3]);
        assert_eq!(once.get(3, 1, 2), t.get(1, 2, 3));
        assert_eq!(once.shift_dims().shift_dims(), t);
    }

    proptest::proptest! {
        #[test]
        fn distribution_property(
            vals in proptest::collection::vec(-1.0f64..1.0, 4 * 3 * 5),
            h in proptest::collection::vec(-2.0f64..2.0, 9),
            d in proptest::collection::vec(0.1f64..2.0, 3),
        ) {
            let t = Tensor3::new([4, 3, 5], vals).unwrap();
            let h = Matrix::from_fn(3, 3, |r, c| h[r * 3 + c]);
            let d = Matrix::diagonal(&d);
            let lhs = i_mode_product(&t, &h.matmul(&d), 2).unwrap();
            let rhs = i_mode_product(&i_mode_product(&t, &d, 2).unwrap(), &h, 2).unwrap();
            for (a, b) in lhs.data().iter().zip(rhs.data()) {
                proptest::prop_assert!((a - b).abs() < 1e-12);
            }
        }
    }
}
