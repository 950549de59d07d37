//! Per-rating recommender influence scores.
//!
//! For each item, the (deconvolved, observed) pairs of its ratings are fitted
//! with a robust line. Each point is then expressed in the line's frame:
//! `x` is the signed distance across the line and `y` the position along it.
//! After `x` is rescaled so that `max|x| = max|y|`, a rating scores
//! `√(x² − y²)` when it lies outside the unit-slope cone `|x| > |y|` and 0
//! otherwise. Ratings far off the trend relative to their position along it
//! are the ones the feedback explains.

mod ransac;

use std::io::Write;

use rayon::prelude::*;

pub use ransac::{
    fit_line, inlier_threshold, total_least_squares, FitStatus, ItemLineFit, Line, RansacParams, SkipReason,
};

use crate::deconvolve::DeconvolutionResult;
use crate::ratings::RatingsMatrix;
use crate::seeds;
use crate::{Error, Result, Scalar};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Scaling {
    /// One factor for the whole dataset.
    #[default]
    Global,
    /// One factor per item.
    PerItem,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScoringParams {
    pub ransac: RansacParams,
    pub scaling: Scaling,
    pub seed: u64,
}

impl Default for ScoringParams {
    fn default() -> Self {
        Self {
            ransac: RansacParams::default(),
            scaling: Scaling::Global,
            seed: 0,
        }
    }
}

impl ScoringParams {
    pub fn with_seed(seed: u64) -> Self {
        Self {
            seed,
            ..Self::default()
        }
    }
}

/// Expresses points in the frame of a fitted line: `x` across, `y` along,
/// both measured from the line's anchor.
///
/// Cross-line offsets within rounding noise of the coordinates are set to
/// exactly zero, so points that lie on the line score zero.
pub fn rotate_translate<T: Scalar>(points: &[[T; 2]], line: &Line<T>) -> Vec<[T; 2]> {
    let n = line.normal();
    let d = line.direction;
    let c = line.point;
    let floor = T::of(16.0) * T::epsilon();
    points
        .iter()
        .map(|p| {
            let (dx, dy) = (p[0] - c[0], p[1] - c[1]);
            let mut x = dx * n[0] + dy * n[1];
            let y = dx * d[0] + dy * d[1];
            let mag = dx.abs() + dy.abs() + c[0].abs() + c[1].abs();
            if x.abs() <= floor * mag {
                x = T::zero();
            }
            [x, y]
        })
        .collect()
}

fn extremes<T: Scalar>(points: &[[T; 2]]) -> (T, T) {
    points.iter().fold((T::zero(), T::zero()), |(mx, my), p| {
        (mx.max(p[0].abs()), my.max(p[1].abs()))
    })
}

/// Factor that makes `max|x|` equal `max|y|`; 1 if every `x` is zero.
pub fn scale_factor<T: Scalar>(points: &[[T; 2]]) -> T {
    let (mx, my) = extremes(points);
    if mx == T::zero() {
        T::one()
    } else {
        my / mx
    }
}

/// Multiplies every `x` by [`scale_factor`] and returns the factor.
///
/// Evaluated as `(x / max|x|) · max|y|`, so the extreme point lands exactly
/// on the cone `|x| = |y|`.
pub fn scale_points<T: Scalar>(points: &mut [[T; 2]]) -> T {
    let (mx, my) = extremes(points);
    rescale_x(points.iter_mut(), mx, my)
}

fn rescale_x<'a, T: Scalar>(points: impl IntoIterator<Item = &'a mut [T; 2]>, mx: T, my: T) -> T {
    if mx == T::zero() {
        return T::one();
    }
    for p in points {
        p[0] = p[0] / mx * my;
    }
    my / mx
}

/// `√(x² − y²)` outside the cone `|x| > |y|`, else 0.
pub fn score_rating<T: Scalar>(x: T, y: T) -> T {
    let (ax, ay) = (x.abs(), y.abs());
    if ax > ay {
        ((ax - ay) * (ax + ay)).sqrt()
    } else {
        T::zero()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScoredRating<T> {
    pub user: usize,
    pub item: usize,
    pub observed: T,
    pub deconvolved: T,
    pub x: T,
    pub y: T,
    pub score: T,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RsScore {
    /// `n_nonzero / n_scored`.
    pub value: f64,
    pub n_scored: usize,
    pub n_nonzero: usize,
    /// Ratings on items whose line could not be fitted; not in the denominator.
    pub n_skipped: usize,
}

/// Fraction of scored ratings with a positive score.
pub fn rs_score<T: Scalar>(scores: &[ScoredRating<T>], n_skipped: usize) -> Result<RsScore> {
    if scores.is_empty() {
        return Err(Error::EmptyInput("no scored ratings"));
    }
    let n_nonzero = scores.iter().filter(|s| s.score > T::zero()).count();
    Ok(RsScore {
        value: n_nonzero as f64 / scores.len() as f64,
        n_scored: scores.len(),
        n_nonzero,
        n_skipped,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ItemRank<T> {
    pub item: usize,
    pub mean_score: T,
    pub n_ratings: usize,
    /// 1-based position in ascending order of mean score.
    pub rank: usize,
}

/// Items ordered by ascending mean score; ties keep item index order, which
/// follows the natural order of the original item IDs.
pub fn item_rank<T: Scalar>(scores: &[ScoredRating<T>]) -> Vec<ItemRank<T>> {
    let n_items = scores.iter().map(|s| s.item + 1).max().unwrap_or(0);
    let mut sums = vec![T::zero(); n_items];
    let mut counts = vec![0usize; n_items];
    for s in scores {
        sums[s.item] += s.score;
        counts[s.item] += 1;
    }
    let mut ranked: Vec<ItemRank<T>> = (0..n_items)
        .filter(|&i| counts[i] > 0)
        .map(|i| ItemRank {
            item: i,
            mean_score: sums[i] / T::of_usize(counts[i]),
            n_ratings: counts[i],
            rank: 0,
        })
        .collect();
    ranked.sort_by(|a, b| {
        a.mean_score
            .partial_cmp(&b.mean_score)
            .expect("scores are finite")
            .then(a.item.cmp(&b.item))
    });
    for (i, r) in ranked.iter_mut().enumerate() {
        r.rank = i + 1;
    }
    ranked
}

#[derive(Debug, Clone)]
pub struct ScoreReport<T> {
    /// One entry per rating on a fitted item, in (user, item) order.
    pub ratings: Vec<ScoredRating<T>>,
    /// One fit per column of the deconvolution.
    pub fits: Vec<ItemLineFit<T>>,
    /// Global factor applied to `x`; 1 under per-item scaling.
    pub scale: T,
    pub rs: RsScore,
}

/// Fits one line per item with an independent RNG stream per item.
pub fn fit_item_lines<T: Scalar>(
    items: &[(usize, Vec<[T; 2]>)],
    params: &RansacParams,
    seed: u64,
) -> Result<Vec<ItemLineFit<T>>> {
    ransac::check_params(params)?;
    Ok(items
        .par_iter()
        .map(|(item, pts)| {
            let mut rng = seeds::stream(seed, &[*item as u64]);
            fit_line(*item, pts, params, &mut rng)
        })
        .collect())
}

/// Scores every observed cell of a deconvolution.
pub fn score<T: Scalar>(result: &DeconvolutionResult<T>, params: &ScoringParams) -> Result<ScoreReport<T>> {
    let n_cols = result.retained_items.len();
    let mut by_col: Vec<Vec<usize>> = vec![Vec::new(); n_cols];
    for (idx, c) in result.cells.iter().enumerate() {
        by_col[c.column].push(idx);
    }
    let items: Vec<(usize, Vec<[T; 2]>)> = by_col
        .iter()
        .enumerate()
        .map(|(col, idxs)| {
            let pts = idxs
                .iter()
                .map(|&k| [result.cells[k].deconvolved, result.cells[k].observed])
                .collect();
            (result.retained_items[col], pts)
        })
        .collect();
    let fits = fit_item_lines(&items, &params.ransac, params.seed)?;

    let mut transformed: Vec<Option<[T; 2]>> = vec![None; result.cells.len()];
    let per_col: Vec<Option<Vec<[T; 2]>>> = fits
        .par_iter()
        .zip(&items)
        .map(|(fit, (_, pts))| {
            fit.line().map(|line| {
                let mut t = rotate_translate(pts, line);
                if params.scaling == Scaling::PerItem {
                    scale_points(&mut t);
                }
                t
            })
        })
        .collect();
    let mut n_skipped = 0;
    for (col, t) in per_col.iter().enumerate() {
        match t {
            Some(t) => {
                for (&k, p) in by_col[col].iter().zip(t) {
                    transformed[k] = Some(*p);
                }
            }
            None => n_skipped += by_col[col].len(),
        }
    }

    let scale = match params.scaling {
        Scaling::Global => {
            let (mx, my) = extremes(&transformed.iter().flatten().copied().collect::<Vec<_>>());
            rescale_x(transformed.iter_mut().flatten(), mx, my)
        }
        Scaling::PerItem => T::one(),
    };
    let ratings: Vec<ScoredRating<T>> = result
        .cells
        .iter()
        .zip(&transformed)
        .filter_map(|(c, t)| {
            t.map(|[x, y]| ScoredRating {
                user: c.user,
                item: result.item_of(c),
                observed: c.observed,
                deconvolved: c.deconvolved,
                x,
                y,
                score: score_rating(x, y),
            })
        })
        .collect();
    let rs = rs_score(&ratings, n_skipped)?;
    Ok(ScoreReport {
        ratings,
        fits,
        scale,
        rs,
    })
}

fn csv_err(e: csv::Error) -> Error {
    Error::io("<csv>", std::io::Error::other(e))
}

/// `user_id,item_id,observed,deconvolved,x,y,score`
pub fn write_scores_csv<T: Scalar, W: Write>(out: W, report: &ScoreReport<T>, ids: &RatingsMatrix<T>) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["user_id", "item_id", "observed", "deconvolved", "x", "y", "score"])
        .map_err(csv_err)?;
    for r in &report.ratings {
        w.write_record([
            ids.user_id(r.user),
            ids.item_id(r.item),
            &r.observed.to_string(),
            &r.deconvolved.to_string(),
            &r.x.to_string(),
            &r.y.to_string(),
            &r.score.to_string(),
        ])
        .map_err(csv_err)?;
    }
    w.flush().map_err(|e| Error::io("<csv>", e))
}

/// `item_id,mean_score,n_ratings,rank`
pub fn write_ranking_csv<T: Scalar, W: Write>(out: W, ranking: &[ItemRank<T>], ids: &RatingsMatrix<T>) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["item_id", "mean_score", "n_ratings", "rank"])
        .map_err(csv_err)?;
    for r in ranking {
        w.write_record([
            ids.item_id(r.item),
            &r.mean_score.to_string(),
            &r.n_ratings.to_string(),
            &r.rank.to_string(),
        ])
        .map_err(csv_err)?;
    }
    w.flush().map_err(|e| Error::io("<csv>", e))
}
