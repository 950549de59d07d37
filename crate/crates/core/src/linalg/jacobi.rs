//! One-sided (Hestenes) Jacobi SVD.
//!
//! Used for the small projected problems produced by the Lanczos process and
//! as a reference decomposition for modest dense matrices. Jacobi keeps high
//! relative accuracy in the small singular values, which the spectral
//! transform is sensitive to.

use super::DenseMatrix;
use crate::scalar::{dot, norm};
use crate::Scalar;

const MAX_SWEEPS: usize = 80;

/// Thin SVD `A = U diag(sigma) Vᵀ` with `r = min(m, n)` columns, sigma nonincreasing.
#[derive(Debug, Clone)]
pub struct DenseSvd<T> {
    pub u: DenseMatrix<T>,
    pub sigma: Vec<T>,
    pub v: DenseMatrix<T>,
}

pub fn jacobi_svd<T: Scalar>(a: &DenseMatrix<T>) -> DenseSvd<T> {
    if a.nrows() < a.ncols() {
        let t = jacobi_svd_tall(a.transpose());
        return DenseSvd {
            u: t.v,
            sigma: t.sigma,
            v: t.u,
        };
    }
    jacobi_svd_tall(a.clone())
}

fn jacobi_svd_tall<T: Scalar>(mut w: DenseMatrix<T>) -> DenseSvd<T> {
    let m = w.nrows();
    let n = w.ncols();
    let mut v = DenseMatrix::identity(n);
    let tol = T::epsilon() * T::of_usize(m.max(1)).sqrt();
    let mut sq: Vec<T> = (0..n).map(|j| dot(w.col(j), w.col(j))).collect();

    for _ in 0..MAX_SWEEPS {
        let mut rotated = false;
        for p in 0..n.saturating_sub(1) {
            for q in p + 1..n {
                let alpha = sq[p];
                let beta = sq[q];
                if alpha == T::zero() || beta == T::zero() {
                    continue;
                }
                let gamma = dot(w.col(p), w.col(q));
                if gamma.abs() <= tol * (alpha.sqrt() * beta.sqrt()) {
                    continue;
                }
                rotated = true;
                let zeta = (beta - alpha) / (T::of(2.0) * gamma);
                let t = zeta.signum() / (zeta.abs() + (T::one() + zeta * zeta).sqrt());
                let c = T::one() / (T::one() + t * t).sqrt();
                let s = c * t;
                rotate(&mut w, p, q, c, s);
                rotate(&mut v, p, q, c, s);
                // exact-in-exact-arithmetic updates drift; recompute the two norms
                sq[p] = dot(w.col(p), w.col(p));
                sq[q] = dot(w.col(q), w.col(q));
            }
        }
        if !rotated {
            break;
        }
    }

    let mut order: Vec<usize> = (0..n).collect();
    let sigma_raw: Vec<T> = (0..n).map(|j| norm(w.col(j))).collect();
    order.sort_by(|&i, &j| sigma_raw[j].partial_cmp(&sigma_raw[i]).unwrap().then(i.cmp(&j)));

    let mut u = DenseMatrix::zeros(m, n);
    let mut vs = DenseMatrix::zeros(n, n);
    let mut sigma = Vec::with_capacity(n);
    for (dst, &src) in order.iter().enumerate() {
        let s = sigma_raw[src];
        sigma.push(s);
        if s > T::zero() {
            for (o, x) in u.col_mut(dst).iter_mut().zip(w.col(src)) {
                *o = *x / s;
            }
        }
        vs.col_mut(dst).copy_from_slice(v.col(src));
    }
    DenseSvd { u, sigma, v: vs }
}

fn rotate<T: Scalar>(m: &mut DenseMatrix<T>, p: usize, q: usize, c: T, s: T) {
    let (cp, cq) = m.col_pair_mut(p, q);
    for (x, y) in cp.iter_mut().zip(cq.iter_mut()) {
        let a = *x;
        let b = *y;
        *x = c * a - s * b;
        *y = s * a + c * b;
    }
}
