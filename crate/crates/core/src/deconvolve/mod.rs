//! Spectral removal of recommender feedback.
//!
//! The observed normalized matrix is modelled as the fixed point of a
//! feedback loop that keeps adding `α R̂ R̂ᵀ`-style similarity terms to the
//! true preferences. In the singular basis this acts on each singular value
//! independently: `σ_obs = σ_true / (1 − α σ_true²)`. Inverting it,
//! `σ_true = 2σ_obs / (1 + √(1 + 4α σ_obs²))`, always stays below both
//! `σ_obs` and `1/√α`.

mod cache;
mod svd;

use std::io::Write;

use rayon::prelude::*;

pub use cache::{read_cache, write_cache, CacheHeader, CACHE_MAGIC, CACHE_VERSION};
pub use svd::{truncated_svd, SvdOptions};

use crate::linalg::{DenseMatrix, LinearOperator};
use crate::ratings::{NormalizedMatrix, RatingsMatrix};
use crate::{Error, Result, Scalar};

/// Top singular triplets `U diag(sigma) Vᵀ` of a matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectralDecomposition<T> {
    pub u: DenseMatrix<T>,
    /// Nonincreasing.
    pub sigma: Vec<T>,
    pub v: DenseMatrix<T>,
    /// Rank that was asked for; larger than [`k`](Self::k) when the matrix
    /// had lower numerical rank.
    pub requested_k: usize,
    /// Largest of `‖A v − σ u‖`, `‖Aᵀu − σ v‖` over the triplets, relative to `σ₁`.
    pub residual: T,
}

impl<T: Scalar> SpectralDecomposition<T> {
    pub fn k(&self) -> usize {
        self.sigma.len()
    }

    pub fn rank_deficient(&self) -> bool {
        self.sigma.len() < self.requested_k
    }

    /// Same singular vectors with new singular values.
    pub fn with_sigma(&self, sigma: Vec<T>) -> Self {
        assert_eq!(sigma.len(), self.sigma.len());
        Self { sigma, ..self.clone() }
    }

    /// Value of the rank-k reconstruction with singular values `sigma` at (row, col).
    pub fn entry_with(&self, sigma: &[T], row: usize, col: usize) -> T {
        (0..self.k())
            .map(|l| self.u[(row, l)] * sigma[l] * self.v[(col, l)])
            .sum()
    }

    pub fn to_dense_with(&self, sigma: &[T]) -> DenseMatrix<T> {
        let mut us = self.u.clone();
        for (l, &s) in sigma.iter().enumerate() {
            us.col_mut(l).iter_mut().for_each(|x| *x *= s);
        }
        us.matmul(&self.v.transpose())
    }
}

fn check_alpha<T: Scalar>(alpha: T) -> Result<()> {
    if alpha > T::zero() && alpha <= T::one() {
        Ok(())
    } else {
        Err(Error::Domain {
            name: "alpha",
            value: alpha.as_f64(),
            domain: "(0, 1]",
        })
    }
}

fn check_sigma<T: Scalar>(sigma: T) -> Result<()> {
    if sigma >= T::zero() && sigma.is_finite() {
        Ok(())
    } else {
        Err(Error::Domain {
            name: "sigma",
            value: sigma.as_f64(),
            domain: "finite, >= 0",
        })
    }
}

/// Singular value with the feedback removed.
///
/// Uses the rationalized root so small `α σ²` does not cancel, and `hypot`
/// so large `σ` does not overflow.
pub fn sigma_true<T: Scalar>(sigma_obs: T, alpha: T) -> Result<T> {
    check_alpha(alpha)?;
    check_sigma(sigma_obs)?;
    if sigma_obs == T::zero() {
        return Ok(T::zero());
    }
    let two = T::of(2.0);
    let root = T::one().hypot(two * sigma_obs * alpha.sqrt());
    Ok(two * sigma_obs / (T::one() + root))
}

/// Feedback applied to a true singular value. Diverges when `α σ² >= 1`.
pub fn sigma_observed<T: Scalar>(sigma: T, alpha: T) -> Result<T> {
    check_alpha(alpha)?;
    check_sigma(sigma)?;
    let product = alpha * sigma * sigma;
    if product >= T::one() {
        return Err(Error::Divergence {
            product: product.as_f64(),
        });
    }
    Ok(sigma / (T::one() - product))
}

/// Applies [`sigma_true`] to every singular value.
pub fn deconvolve_spectrum<T: Scalar>(d: &SpectralDecomposition<T>, alpha: T) -> Result<Vec<T>> {
    d.sigma.iter().map(|&s| sigma_true(s, alpha)).collect()
}

/// Adds the feedback to a decomposition: singular values go through
/// [`sigma_observed`], singular vectors are kept.
pub fn forward_convolve<T: Scalar>(d: &SpectralDecomposition<T>, alpha: T) -> Result<SpectralDecomposition<T>> {
    let sigma = d
        .sigma
        .iter()
        .map(|&s| sigma_observed(s, alpha))
        .collect::<Result<Vec<T>>>()?;
    Ok(d.with_sigma(sigma))
}

/// Observed and deconvolved value of one observed cell.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CellPair<T> {
    pub user: usize,
    /// Column of the normalized matrix; see [`DeconvolutionResult::retained_items`].
    pub column: usize,
    pub observed: T,
    pub deconvolved: T,
}

#[derive(Debug, Clone)]
pub struct DeconvolutionResult<T> {
    pub spectrum: SpectralDecomposition<T>,
    pub sigma_true: Vec<T>,
    pub alpha: T,
    /// Source item index of each column.
    pub retained_items: Vec<usize>,
    /// One pair per observed cell of the normalized matrix, in (user, column) order.
    pub cells: Vec<CellPair<T>>,
}

impl<T: Scalar> DeconvolutionResult<T> {
    pub fn item_of(&self, cell: &CellPair<T>) -> usize {
        self.retained_items[cell.column]
    }
}

/// Decomposes the normalized matrix, removes the feedback from its spectrum
/// and evaluates both rank-k reconstructions at the observed cells.
pub fn deconvolve<T: Scalar>(
    normalized: &NormalizedMatrix<T>,
    alpha: T,
    k: usize,
    opts: &SvdOptions<T>,
) -> Result<DeconvolutionResult<T>> {
    check_alpha(alpha)?;
    let spectrum = truncated_svd(&normalized.matrix, k, opts)?;
    deconvolve_with(normalized, spectrum, alpha)
}

/// As [`deconvolve`], with a precomputed (for example cached) decomposition.
pub fn deconvolve_with<T: Scalar>(
    normalized: &NormalizedMatrix<T>,
    spectrum: SpectralDecomposition<T>,
    alpha: T,
) -> Result<DeconvolutionResult<T>> {
    let (m, n) = (normalized.matrix.nrows(), normalized.matrix.ncols());
    if spectrum.u.nrows() != m || spectrum.v.nrows() != n {
        return Err(Error::InvalidArgument(format!(
            "decomposition of a {} x {} matrix does not fit {m} x {n}",
            spectrum.u.nrows(),
            spectrum.v.nrows()
        )));
    }
    let sigma_true = deconvolve_spectrum(&spectrum, alpha)?;
    let cells = observed_cells(normalized, &spectrum, &sigma_true);
    Ok(DeconvolutionResult {
        spectrum,
        sigma_true,
        alpha,
        retained_items: normalized.retained_items.clone(),
        cells,
    })
}

fn observed_cells<T: Scalar>(
    normalized: &NormalizedMatrix<T>,
    spectrum: &SpectralDecomposition<T>,
    sigma_true: &[T],
) -> Vec<CellPair<T>> {
    let k = spectrum.k();
    let row_major = |d: &DenseMatrix<T>| {
        let mut out = vec![T::zero(); d.nrows() * k];
        for l in 0..k {
            for (i, &x) in d.col(l).iter().enumerate() {
                out[i * k + l] = x;
            }
        }
        out
    };
    let u = row_major(&spectrum.u);
    let v = row_major(&spectrum.v);
    let sigma_obs = &spectrum.sigma;

    (0..normalized.matrix.nrows())
        .into_par_iter()
        .flat_map_iter(|user| {
            let (cols, _) = normalized.matrix.row(user);
            let ur = &u[user * k..(user + 1) * k];
            let v = &v;
            cols.iter().map(move |&column| {
                let vr = &v[column * k..(column + 1) * k];
                let mut observed = T::zero();
                let mut deconvolved = T::zero();
                for l in 0..k {
                    let uv = ur[l] * vr[l];
                    observed += uv * sigma_obs[l];
                    deconvolved += uv * sigma_true[l];
                }
                CellPair {
                    user,
                    column,
                    observed,
                    deconvolved,
                }
            })
        })
        .collect()
}

fn csv_err(e: csv::Error) -> Error {
    Error::io("<csv>", std::io::Error::other(e))
}

/// `user_id,item_id,observed,deconvolved`
pub fn write_cells_csv<T: Scalar, W: Write>(
    out: W,
    result: &DeconvolutionResult<T>,
    ids: &RatingsMatrix<T>,
) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["user_id", "item_id", "observed", "deconvolved"])
        .map_err(csv_err)?;
    for c in &result.cells {
        w.write_record([
            ids.user_id(c.user),
            ids.item_id(result.item_of(c)),
            &c.observed.to_string(),
            &c.deconvolved.to_string(),
        ])
        .map_err(csv_err)?;
    }
    w.flush().map_err(|e| Error::io("<csv>", e))
}

/// `index,sigma_obs,sigma_true`, 1-based.
pub fn write_spectrum_csv<T: Scalar, W: Write>(out: W, result: &DeconvolutionResult<T>) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["index", "sigma_obs", "sigma_true"]).map_err(csv_err)?;
    for (i, (o, t)) in result.spectrum.sigma.iter().zip(&result.sigma_true).enumerate() {
        w.write_record([(i + 1).to_string(), o.to_string(), t.to_string()])
            .map_err(csv_err)?;
    }
    w.flush().map_err(|e| Error::io("<csv>", e))
}
