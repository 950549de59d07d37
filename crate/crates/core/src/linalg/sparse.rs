use rayon::prelude::*;

use super::LinearOperator;
use crate::Scalar;

/// Below this many stored entries products run on the calling thread.
const PARALLEL_NNZ: usize = 1 << 16;

/// Sparse matrix stored twice, row-major and column-major, so that both
/// `A x` and `Aᵀ x` are gather-only (and therefore deterministic when parallel).
#[derive(Debug, Clone, PartialEq)]
pub struct SparseMatrix<T> {
    nrows: usize,
    ncols: usize,
    row_ptr: Vec<usize>,
    col_idx: Vec<usize>,
    row_values: Vec<T>,
    col_ptr: Vec<usize>,
    row_idx: Vec<usize>,
    col_values: Vec<T>,
}

impl<T: Scalar> SparseMatrix<T> {
    /// `triplets` must be sorted by (row, col) without duplicates.
    pub fn from_sorted_triplets(
        nrows: usize,
        ncols: usize,
        triplets: impl IntoIterator<Item = (usize, usize, T)>,
    ) -> Self {
        let mut row_ptr = vec![0usize; nrows + 1];
        let mut col_idx = Vec::new();
        let mut row_values = Vec::new();
        let mut col_counts = vec![0usize; ncols + 1];
        let mut last: Option<(usize, usize)> = None;
        for (r, c, v) in triplets {
            assert!(r < nrows && c < ncols, "triplet ({r},{c}) out of bounds");
            debug_assert!(last.is_none_or(|p| p < (r, c)), "triplets not sorted/unique");
            last = Some((r, c));
            row_ptr[r + 1] += 1;
            col_counts[c + 1] += 1;
            col_idx.push(c);
            row_values.push(v);
        }
        for r in 0..nrows {
            row_ptr[r + 1] += row_ptr[r];
        }
        for c in 0..ncols {
            col_counts[c + 1] += col_counts[c];
        }
        let col_ptr = col_counts.clone();
        let mut fill = col_counts;
        let nnz = col_idx.len();
        let mut row_idx = vec![0usize; nnz];
        let mut col_values = vec![T::zero(); nnz];
        for r in 0..nrows {
            for k in row_ptr[r]..row_ptr[r + 1] {
                let c = col_idx[k];
                let dst = fill[c];
                row_idx[dst] = r;
                col_values[dst] = row_values[k];
                fill[c] += 1;
            }
        }
        Self {
            nrows,
            ncols,
            row_ptr,
            col_idx,
            row_values,
            col_ptr,
            row_idx,
            col_values,
        }
    }

    pub fn nnz(&self) -> usize {
        self.row_values.len()
    }

    /// Column indices and values of row `r`.
    pub fn row(&self, r: usize) -> (&[usize], &[T]) {
        let span = self.row_ptr[r]..self.row_ptr[r + 1];
        (&self.col_idx[span.clone()], &self.row_values[span])
    }

    /// Row indices and values of column `c`.
    pub fn col(&self, c: usize) -> (&[usize], &[T]) {
        let span = self.col_ptr[c]..self.col_ptr[c + 1];
        (&self.row_idx[span.clone()], &self.col_values[span])
    }

    /// Entries in row-major order.
    pub fn iter(&self) -> impl Iterator<Item = (usize, usize, T)> + '_ {
        (0..self.nrows).flat_map(move |r| {
            let (cols, vals) = self.row(r);
            cols.iter().zip(vals).map(move |(&c, &v)| (r, c, v))
        })
    }

    pub fn to_dense(&self) -> super::DenseMatrix<T> {
        let mut d = super::DenseMatrix::zeros(self.nrows, self.ncols);
        for (r, c, v) in self.iter() {
            d[(r, c)] = v;
        }
        d
    }
}

fn gather<T: Scalar>(ptr: &[usize], idx: &[usize], vals: &[T], x: &[T], out: &mut [T]) {
    let kernel = |(i, yi): (usize, &mut T)| {
        let mut acc = T::zero();
        for k in ptr[i]..ptr[i + 1] {
            acc += vals[k] * x[idx[k]];
        }
        *yi = acc;
    };
    if vals.len() >= PARALLEL_NNZ {
        out.par_iter_mut().enumerate().for_each(kernel);
    } else {
        out.iter_mut().enumerate().for_each(kernel);
    }
}

impl<T: Scalar> LinearOperator<T> for SparseMatrix<T> {
    fn nrows(&self) -> usize {
        self.nrows
    }

    fn ncols(&self) -> usize {
        self.ncols
    }

    fn apply(&self, x: &[T], y: &mut [T]) {
        assert_eq!(x.len(), self.ncols);
        assert_eq!(y.len(), self.nrows);
        gather(&self.row_ptr, &self.col_idx, &self.row_values, x, y);
    }

    fn apply_transpose(&self, x: &[T], y: &mut [T]) {
        assert_eq!(x.len(), self.nrows);
        assert_eq!(y.len(), self.ncols);
        gather(&self.col_ptr, &self.row_idx, &self.col_values, x, y);
    }
}
