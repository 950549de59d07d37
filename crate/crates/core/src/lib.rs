//! Separating true user preferences from recommender feedback in a single
//! snapshot of a ratings matrix.
//!
//! The pipeline: [`ratings`] loads and normalizes a matrix, [`deconvolve`]
//! removes the feedback from its spectrum, [`scoring`] compares the observed
//! and deconvolved values cell by cell, [`synthetic`] simulates feedback loops
//! with known ground truth and [`eval`] measures detection quality on them.
//!
//! Linear algebra, normalization, deconvolution and scoring are generic over
//! [`Scalar`] (`f32` or `f64`); the aliases below fix it to `f64`. The
//! simulator works in `f64` throughout.

pub mod deconvolve;
mod error;
pub mod eval;
pub mod linalg;
pub mod ratings;
mod scalar;
pub mod scoring;
pub mod seeds;
pub mod synthetic;

pub use error::{Error, ErrorKind, Result};
pub use scalar::Scalar;

pub type Real = f64;
pub type Ratings = ratings::RatingsMatrix<Real>;
pub type Normalized = ratings::NormalizedMatrix<Real>;
pub type Spectrum = deconvolve::SpectralDecomposition<Real>;
pub type Deconvolution = deconvolve::DeconvolutionResult<Real>;
pub type Scores = scoring::ScoreReport<Real>;
