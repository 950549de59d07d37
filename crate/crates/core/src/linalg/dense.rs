use super::LinearOperator;
use crate::scalar::dot;
use crate::Scalar;

/// Column-major dense matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseMatrix<T> {
    nrows: usize,
    ncols: usize,
    data: Vec<T>,
}

impl<T: Scalar> DenseMatrix<T> {
    pub fn zeros(nrows: usize, ncols: usize) -> Self {
        Self {
            nrows,
            ncols,
            data: vec![T::zero(); nrows * ncols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = T::one();
        }
        m
    }

    pub fn from_fn(nrows: usize, ncols: usize, mut f: impl FnMut(usize, usize) -> T) -> Self {
        let mut data = Vec::with_capacity(nrows * ncols);
        for j in 0..ncols {
            for i in 0..nrows {
                data.push(f(i, j));
            }
        }
        Self { nrows, ncols, data }
    }

    /// Builds from column-major storage.
    pub fn from_column_major(nrows: usize, ncols: usize, data: Vec<T>) -> Self {
        assert_eq!(data.len(), nrows * ncols, "column-major buffer size mismatch");
        Self { nrows, ncols, data }
    }

    pub fn from_columns(nrows: usize, columns: &[Vec<T>]) -> Self {
        let mut data = Vec::with_capacity(nrows * columns.len());
        for c in columns {
            assert_eq!(c.len(), nrows);
            data.extend_from_slice(c);
        }
        Self {
            nrows,
            ncols: columns.len(),
            data,
        }
    }

    pub fn nrows(&self) -> usize {
        self.nrows
    }

    pub fn ncols(&self) -> usize {
        self.ncols
    }

    pub fn as_slice(&self) -> &[T] {
        &self.data
    }

    pub fn col(&self, j: usize) -> &[T] {
        &self.data[j * self.nrows..(j + 1) * self.nrows]
    }

    pub fn col_mut(&mut self, j: usize) -> &mut [T] {
        &mut self.data[j * self.nrows..(j + 1) * self.nrows]
    }

    /// Mutable access to two distinct columns at once.
    pub(crate) fn col_pair_mut(&mut self, a: usize, b: usize) -> (&mut [T], &mut [T]) {
        assert!(a < b && b < self.ncols);
        let n = self.nrows;
        let (left, right) = self.data.split_at_mut(b * n);
        (&mut left[a * n..(a + 1) * n], &mut right[..n])
    }

    pub fn transpose(&self) -> Self {
        Self::from_fn(self.ncols, self.nrows, |i, j| self[(j, i)])
    }

    /// Keeps the first `k` columns.
    pub fn truncate_columns(&mut self, k: usize) {
        assert!(k <= self.ncols);
        self.data.truncate(k * self.nrows);
        self.ncols = k;
    }

    pub fn matmul(&self, rhs: &DenseMatrix<T>) -> DenseMatrix<T> {
        assert_eq!(self.ncols, rhs.nrows, "matmul dimension mismatch");
        let mut out = DenseMatrix::zeros(self.nrows, rhs.ncols);
        for j in 0..rhs.ncols {
            let dst = &mut out.data[j * self.nrows..(j + 1) * self.nrows];
            for (l, &w) in rhs.col(j).iter().enumerate() {
                if w != T::zero() {
                    crate::scalar::axpy(w, self.col(l), dst);
                }
            }
        }
        out
    }

    /// `selfᵀ · rhs`.
    pub fn tmatmul(&self, rhs: &DenseMatrix<T>) -> DenseMatrix<T> {
        assert_eq!(self.nrows, rhs.nrows, "tmatmul dimension mismatch");
        DenseMatrix::from_fn(self.ncols, rhs.ncols, |i, j| dot(self.col(i), rhs.col(j)))
    }

    /// Largest absolute deviation of `selfᵀ self` from the identity.
    pub fn orthonormality_error(&self) -> T {
        let g = self.tmatmul(self);
        let mut worst = T::zero();
        for j in 0..g.ncols {
            for i in 0..g.nrows {
                let target = if i == j { T::one() } else { T::zero() };
                worst = worst.max((g[(i, j)] - target).abs());
            }
        }
        worst
    }
}

impl<T> std::ops::Index<(usize, usize)> for DenseMatrix<T> {
    type Output = T;
    fn index(&self, (i, j): (usize, usize)) -> &T {
        debug_assert!(i < self.nrows && j < self.ncols);
        &self.data[j * self.nrows + i]
    }
}

impl<T> std::ops::IndexMut<(usize, usize)> for DenseMatrix<T> {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut T {
        debug_assert!(i < self.nrows && j < self.ncols);
        &mut self.data[j * self.nrows + i]
    }
}

impl<T: Scalar> LinearOperator<T> for DenseMatrix<T> {
    fn nrows(&self) -> usize {
        self.nrows
    }

    fn ncols(&self) -> usize {
        self.ncols
    }

    fn apply(&self, x: &[T], y: &mut [T]) {
        y.fill(T::zero());
        for (j, &xj) in x.iter().enumerate() {
            if xj != T::zero() {
                crate::scalar::axpy(xj, self.col(j), y);
            }
        }
    }

    fn apply_transpose(&self, x: &[T], y: &mut [T]) {
        for (j, yj) in y.iter_mut().enumerate() {
            *yj = dot(self.col(j), x);
        }
    }
}
