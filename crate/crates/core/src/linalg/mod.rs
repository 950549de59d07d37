//! Minimal dense/sparse storage and the operator abstraction the Krylov solver runs on.

mod dense;
mod jacobi;
mod sparse;

pub use dense::DenseMatrix;
pub use jacobi::{jacobi_svd, DenseSvd};
pub use sparse::SparseMatrix;

use crate::Scalar;

/// A matrix that can only be touched through products with vectors.
pub trait LinearOperator<T: Scalar>: Sync {
    fn nrows(&self) -> usize;
    fn ncols(&self) -> usize;
    /// `y = A x`; `y` has length `nrows` and is overwritten.
    fn apply(&self, x: &[T], y: &mut [T]);
    /// `y = Aᵀ x`; `y` has length `ncols` and is overwritten.
    fn apply_transpose(&self, x: &[T], y: &mut [T]);
}

/// Transposed view of an operator.
pub struct Transposed<'a, A: ?Sized>(pub &'a A);

impl<T: Scalar, A: LinearOperator<T> + ?Sized> LinearOperator<T> for Transposed<'_, A> {
    fn nrows(&self) -> usize {
        self.0.ncols()
    }
    fn ncols(&self) -> usize {
        self.0.nrows()
    }
    fn apply(&self, x: &[T], y: &mut [T]) {
        self.0.apply_transpose(x, y)
    }
    fn apply_transpose(&self, x: &[T], y: &mut [T]) {
        self.0.apply(x, y)
    }
}
