//! Truncated SVD by Golub–Kahan–Lanczos bidiagonalization.
//!
//! Both Lanczos bases are fully reorthogonalized (two Gram–Schmidt passes)
//! and the Krylov space grows until the top-k Ritz triplets meet the residual
//! tolerance or the whole column space is spanned, at which point the
//! projected problem is exact. Breakdowns (invariant subspaces, rank
//! deficiency) are handled by continuing from a fresh random vector
//! orthogonal to the current basis, which keeps the projection bidiagonal.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use super::SpectralDecomposition;
use crate::linalg::{jacobi_svd, DenseMatrix, LinearOperator, Transposed};
use crate::scalar::{axpy, dot, norm, scale};
use crate::{Error, Result, Scalar};

/// Lanczos steps are allowed to reach this many (or the full column space,
/// if smaller) even when `10·k` is less; small k on clustered spectra needs it.
const MIN_STEP_CAP: usize = 300;

#[derive(Debug, Clone)]
pub struct SvdOptions<T> {
    /// Relative residual target: `‖A v − σ u‖` and `‖Aᵀu − σ v‖` ≤ `tol · σ₁`.
    pub tol: T,
    /// Seed of the Lanczos starting vector.
    pub seed: u64,
    /// Cap on Lanczos steps; defaults to `max(10·k, 300)`, bounded by the
    /// smaller matrix dimension.
    pub max_steps: Option<usize>,
}

impl<T: Scalar> Default for SvdOptions<T> {
    fn default() -> Self {
        Self {
            tol: T::of(1e-10).max(T::epsilon() * T::of(100.0)),
            seed: 0,
            max_steps: None,
        }
    }
}

impl<T: Scalar> SvdOptions<T> {
    pub fn with_seed(seed: u64) -> Self {
        Self {
            seed,
            ..Self::default()
        }
    }
}

/// Top-`k` singular triplets of `op`.
///
/// `k` must lie in `[1, min(rows, cols)]`. If the operator has numerical rank
/// below `k`, the returned decomposition holds the achievable rank and
/// [`SpectralDecomposition::rank_deficient`] reports it.
pub fn truncated_svd<T, A>(op: &A, k: usize, opts: &SvdOptions<T>) -> Result<SpectralDecomposition<T>>
where
    T: Scalar,
    A: LinearOperator<T> + ?Sized,
{
    let (m, n) = (op.nrows(), op.ncols());
    let min_dim = m.min(n);
    if k == 0 || k > min_dim {
        return Err(Error::InvalidArgument(format!(
            "k = {k} must lie in [1, {min_dim}] for a {m} x {n} matrix"
        )));
    }
    if !(opts.tol > T::zero()) {
        return Err(Error::Domain {
            name: "tol",
            value: opts.tol.as_f64(),
            domain: "> 0",
        });
    }
    if m >= n {
        lanczos(op, k, opts)
    } else {
        let t = lanczos(&Transposed(op), k, opts)?;
        Ok(SpectralDecomposition {
            u: t.v,
            sigma: t.sigma,
            v: t.u,
            requested_k: t.requested_k,
            residual: t.residual,
        })
    }
}

struct Basis<T> {
    vectors: Vec<Vec<T>>,
}

impl<T: Scalar> Basis<T> {
    fn orthogonalize(&self, x: &mut [T]) {
        for _ in 0..2 {
            for b in &self.vectors {
                let h = dot(b, x);
                axpy(-h, b, x);
            }
        }
    }

    /// Random unit vector orthogonal to the basis; the basis must not span the space.
    fn fresh(&self, dim: usize, rng: &mut ChaCha8Rng) -> Vec<T> {
        loop {
            let mut x: Vec<T> = (0..dim).map(|_| T::of(StandardNormal.sample(&mut *rng))).collect();
            let before = norm(&x);
            self.orthogonalize(&mut x);
            let after = norm(&x);
            if after > before * T::of(1e-3) {
                scale(T::one() / after, &mut x);
                return x;
            }
        }
    }
}

/// Lanczos on a tall-or-square operator (`rows >= cols`).
fn lanczos<T, A>(op: &A, k: usize, opts: &SvdOptions<T>) -> Result<SpectralDecomposition<T>>
where
    T: Scalar,
    A: LinearOperator<T> + ?Sized,
{
    let (m, n) = (op.nrows(), op.ncols());
    let cap = opts
        .max_steps
        .unwrap_or_else(|| (10 * k).max(MIN_STEP_CAP))
        .max(k)
        .min(n);
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let breakdown = T::epsilon() * T::of(100.0);

    let mut left = Basis { vectors: Vec::new() };
    let mut right = Basis { vectors: Vec::new() };
    let mut alphas: Vec<T> = Vec::new();
    let mut betas: Vec<T> = Vec::new();
    let mut anorm = T::zero();
    let mut best = f64::INFINITY;
    let mut next_check = (2 * k).max(k + 10).min(cap);

    // A breakdown right after a fresh vector was injected means the operator
    // vanishes on the complement of the current basis: the spectrum is complete.
    let mut q = right.fresh(n, &mut rng);
    let mut q_fresh = false;
    loop {
        right.vectors.push(q);
        let j = right.vectors.len() - 1;
        let steps = j + 1;
        let mut exhausted = false;

        let mut p = vec![T::zero(); m];
        op.apply(&right.vectors[j], &mut p);
        if j > 0 {
            axpy(-betas[j - 1], &left.vectors[j - 1], &mut p);
        }
        left.orthogonalize(&mut p);
        let mut alpha = norm(&p);
        anorm = anorm.max(alpha);
        let mut p_fresh = false;
        if alpha <= breakdown * anorm {
            alpha = T::zero();
            exhausted = q_fresh;
            p = left.fresh(m, &mut rng);
            p_fresh = true;
        } else {
            scale(T::one() / alpha, &mut p);
        }
        left.vectors.push(p);
        alphas.push(alpha);

        let spans_columns = steps == n;
        let mut restarted = false;
        let next = if spans_columns || exhausted {
            betas.push(T::zero());
            None
        } else {
            let mut r = vec![T::zero(); n];
            op.apply_transpose(&left.vectors[j], &mut r);
            axpy(-alpha, &right.vectors[j], &mut r);
            right.orthogonalize(&mut r);
            let mut beta = norm(&r);
            anorm = anorm.max(beta);
            if beta <= breakdown * anorm {
                beta = T::zero();
                exhausted = p_fresh;
                r = right.fresh(n, &mut rng);
                restarted = true;
            } else {
                scale(T::one() / beta, &mut r);
            }
            betas.push(beta);
            Some(r)
        };
        q_fresh = restarted;

        let at_cap = steps >= cap;
        if spans_columns || exhausted || at_cap || (steps >= next_check && !restarted) {
            let b = DenseMatrix::from_fn(steps, steps, |i, c| {
                if i == c {
                    alphas[i]
                } else if c == i + 1 {
                    betas[i]
                } else {
                    T::zero()
                }
            });
            let small = jacobi_svd(&b);
            let sigma1 = small.sigma[0];
            let beta_last = betas[j];
            let kk = k.min(steps);
            let worst = (0..kk)
                .map(|i| (beta_last * small.u[(j, i)]).abs())
                .fold(T::zero(), T::max);
            let rel = if sigma1 > T::zero() {
                (worst / sigma1).as_f64()
            } else {
                0.0
            };
            let converged = spans_columns || exhausted || (!restarted && rel <= opts.tol.as_f64());
            if converged {
                return Ok(assemble(op, k, &left, &right, small.u, small.sigma, small.v));
            }
            best = best.min(rel);
            if at_cap {
                return Err(Error::NotConverged {
                    steps,
                    best_residual: best,
                });
            }
            next_check = (steps + steps / 2).max(steps + 1).min(cap);
        }
        q = next.expect("basis spans the column space only at the final step");
    }
}

fn assemble<T, A>(
    op: &A,
    k: usize,
    left: &Basis<T>,
    right: &Basis<T>,
    y: DenseMatrix<T>,
    sigma_all: Vec<T>,
    z: DenseMatrix<T>,
) -> SpectralDecomposition<T>
where
    T: Scalar,
    A: LinearOperator<T> + ?Sized,
{
    let (m, n) = (op.nrows(), op.ncols());
    let sigma1 = sigma_all[0];
    let rank_tol = sigma1 * T::epsilon() * T::of_usize(m.max(n));
    let rank = sigma_all.iter().take_while(|&&s| s > rank_tol).count();
    let kk = k.min(rank).max(if sigma1 > T::zero() { 1 } else { 0 });
    let steps = right.vectors.len();

    let combine = |basis: &Basis<T>, dim: usize, coeffs: &DenseMatrix<T>| {
        let mut out = DenseMatrix::zeros(dim, kk);
        for i in 0..kk {
            let dst = out.col_mut(i);
            for l in 0..steps {
                let c = coeffs[(l, i)];
                if c != T::zero() {
                    axpy(c, &basis.vectors[l], dst);
                }
            }
        }
        out
    };
    let u = combine(left, m, &y);
    let v = combine(right, n, &z);
    let sigma: Vec<T> = sigma_all[..kk].to_vec();

    let mut residual = T::zero();
    if sigma1 > T::zero() {
        let mut av = vec![T::zero(); m];
        let mut atu = vec![T::zero(); n];
        for i in 0..kk {
            op.apply(v.col(i), &mut av);
            axpy(-sigma[i], u.col(i), &mut av);
            op.apply_transpose(u.col(i), &mut atu);
            axpy(-sigma[i], v.col(i), &mut atu);
            residual = residual.max(norm(&av)).max(norm(&atu));
        }
        residual /= sigma1;
    }
    SpectralDecomposition {
        u,
        sigma,
        v,
        requested_k: k,
        residual,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::SparseMatrix;
    use approx::assert_relative_eq;

    #[test]
    fn diagonal_top_two() {
        let d = DenseMatrix::from_fn(3, 3, |i, j| if i == j { [3.0, 2.0, 1.0][i] } else { 0.0 });
        let s = truncated_svd(&d, 2, &SvdOptions::default()).unwrap();
        assert_eq!(s.k(), 2);
        assert_relative_eq!(s.sigma[0], 3.0, epsilon = 1e-12);
        assert_relative_eq!(s.sigma[1], 2.0, epsilon = 1e-12);
        assert!(!s.rank_deficient());
    }

    #[test]
    fn rank_one_reports_achievable_rank() {
        let u = [0.6, 0.8, 0.0];
        let v = [0.0, 1.0 / 2f64.sqrt(), 1.0 / 2f64.sqrt()];
        let a = DenseMatrix::from_fn(3, 3, |i, j| u[i] * v[j]);
        let s = truncated_svd(&a, 3, &SvdOptions::default()).unwrap();
        assert_eq!(s.k(), 1);
        assert!(s.rank_deficient());
        assert_eq!(s.requested_k, 3);
        assert_relative_eq!(s.sigma[0], 1.0, epsilon = 1e-12);
    }

    #[test]
    fn wide_sparse_input() {
        let a = SparseMatrix::from_sorted_triplets(2, 4, vec![(0, 0, 1.0), (0, 3, 2.0), (1, 1, -1.0), (1, 2, 0.5)]);
        let s = truncated_svd(&a, 2, &SvdOptions::default()).unwrap();
        assert_relative_eq!(s.sigma[0], 5f64.sqrt(), epsilon = 1e-12);
        assert_relative_eq!(s.sigma[1], 1.25f64.sqrt(), epsilon = 1e-12);
        assert_eq!((s.u.nrows(), s.v.nrows()), (2, 4));
        assert!(s.residual < 1e-12);
    }

    #[test]
    fn k_out_of_range() {
        let d = DenseMatrix::<f64>::identity(3);
        assert!(matches!(
            truncated_svd(&d, 0, &SvdOptions::default()),
            Err(Error::InvalidArgument(_))
        ));
        assert!(matches!(
            truncated_svd(&d, 4, &SvdOptions::default()),
            Err(Error::InvalidArgument(_))
        ));
    }

    #[test]
    fn step_cap_surfaces_non_convergence() {
        // clustered spectrum with a tiny cap cannot meet the tolerance
        let n = 200;
        let a = DenseMatrix::from_fn(n, n, |i, j| if i == j { 1.0 + 1e-3 * (i as f64).sin() } else { 0.0 });
        let opts = SvdOptions {
            max_steps: Some(3),
            ..SvdOptions::default()
        };
        match truncated_svd(&a, 2, &opts) {
            Err(Error::NotConverged { steps, best_residual }) => {
                assert_eq!(steps, 3);
                assert!(best_residual.is_finite() && best_residual > 0.0);
            }
            other => panic!("expected non-convergence, got {other:?}"),
        }
    }

    #[test]
    fn identical_output_for_fixed_seed() {
        let a = DenseMatrix::from_fn(40, 25, |i, j| ((i * 31 + j * 17) % 13) as f64 - 6.0);
        let opts = SvdOptions::with_seed(9);
        let s1 = truncated_svd(&a, 4, &opts).unwrap();
        let s2 = truncated_svd(&a, 4, &opts).unwrap();
        assert_eq!(s1.sigma, s2.sigma);
        assert_eq!(s1.u, s2.u);
    }
}
