use rand::Rng;

use crate::Scalar;

/// Line fitting settings. The inlier threshold is relative to the spread of
/// the item's observed values.
#[derive(Debug, Clone, PartialEq)]
pub struct RansacParams {
    pub iterations: usize,
    /// Inlier threshold as a fraction of the item's observed-value range.
    pub threshold_fraction: f64,
    /// Items with fewer ratings are skipped.
    pub min_points: usize,
}

impl Default for RansacParams {
    fn default() -> Self {
        Self {
            iterations: 200,
            threshold_fraction: 0.05,
            min_points: 3,
        }
    }
}

/// A line in the (deconvolved, observed) plane.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Line<T> {
    /// Anchor on the line: the centroid of the inliers.
    pub point: [T; 2],
    /// Unit direction, oriented so the observed component is nonnegative.
    pub direction: [T; 2],
}

impl<T: Scalar> Line<T> {
    /// Unit normal `(d_y, −d_x)`.
    pub fn normal(&self) -> [T; 2] {
        [self.direction[1], -self.direction[0]]
    }

    pub fn distance(&self, p: [T; 2]) -> T {
        let n = self.normal();
        ((p[0] - self.point[0]) * n[0] + (p[1] - self.point[1]) * n[1]).abs()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SkipReason {
    TooFewRatings,
    /// Every point coincides, so no direction is defined.
    Degenerate,
}

impl std::fmt::Display for SkipReason {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            SkipReason::TooFewRatings => "too few ratings",
            SkipReason::Degenerate => "all points coincide",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum FitStatus<T> {
    Fitted(Line<T>),
    Skipped(SkipReason),
}

#[derive(Debug, Clone, PartialEq)]
pub struct ItemLineFit<T> {
    pub item: usize,
    pub status: FitStatus<T>,
    /// Consensus set of the best sampled line, one flag per input point.
    pub inliers: Vec<bool>,
}

impl<T: Scalar> ItemLineFit<T> {
    pub fn line(&self) -> Option<&Line<T>> {
        match &self.status {
            FitStatus::Fitted(l) => Some(l),
            FitStatus::Skipped(_) => None,
        }
    }

    pub fn inlier_count(&self) -> usize {
        self.inliers.iter().filter(|&&b| b).count()
    }
}

pub(crate) fn check_params(params: &RansacParams) -> crate::Result<()> {
    if params.iterations == 0 {
        return Err(crate::Error::InvalidArgument("ransac iterations must be >= 1".into()));
    }
    if !(params.threshold_fraction > 0.0 && params.threshold_fraction.is_finite()) {
        return Err(crate::Error::Domain {
            name: "ransac threshold",
            value: params.threshold_fraction,
            domain: "> 0",
        });
    }
    if params.min_points < 2 {
        return Err(crate::Error::InvalidArgument("ransac min_points must be >= 2".into()));
    }
    Ok(())
}

/// Absolute inlier threshold for a set of points.
///
/// Floored at a few ulps of the coordinate magnitude so exactly collinear
/// points stay inliers when the observed values do not vary.
pub fn inlier_threshold<T: Scalar>(points: &[[T; 2]], fraction: f64) -> T {
    let (mut lo, mut hi) = (T::infinity(), T::neg_infinity());
    let mut mag = T::zero();
    for p in points {
        lo = lo.min(p[1]);
        hi = hi.max(p[1]);
        mag = mag.max(p[0].abs()).max(p[1].abs());
    }
    let range = if points.is_empty() { T::zero() } else { hi - lo };
    (T::of(fraction) * range).max(T::of(16.0) * T::epsilon() * mag)
}

fn orient<T: Scalar>(d: [T; 2]) -> [T; 2] {
    if d[1] < T::zero() || (d[1] == T::zero() && d[0] < T::zero()) {
        [-d[0], -d[1]]
    } else {
        d
    }
}

/// Line through two points, or `None` if they coincide.
fn through<T: Scalar>(a: [T; 2], b: [T; 2]) -> Option<Line<T>> {
    let (dx, dy) = (b[0] - a[0], b[1] - a[1]);
    let len = dx.hypot(dy);
    if len == T::zero() || !len.is_finite() {
        return None;
    }
    Some(Line {
        point: a,
        direction: orient([dx / len, dy / len]),
    })
}

/// Total least squares line through a point set: centroid plus principal axis.
pub fn total_least_squares<T: Scalar>(points: &[[T; 2]]) -> Option<Line<T>> {
    if points.is_empty() {
        return None;
    }
    let n = T::of_usize(points.len());
    let cx = points.iter().map(|p| p[0]).sum::<T>() / n;
    let cy = points.iter().map(|p| p[1]).sum::<T>() / n;
    let (mut sxx, mut sxy, mut syy) = (T::zero(), T::zero(), T::zero());
    for p in points {
        let (dx, dy) = (p[0] - cx, p[1] - cy);
        sxx += dx * dx;
        sxy += dx * dy;
        syy += dy * dy;
    }
    if sxx == T::zero() && syy == T::zero() {
        return None;
    }
    let theta = (T::of(2.0) * sxy).atan2(sxx - syy) / T::of(2.0);
    Some(Line {
        point: [cx, cy],
        direction: orient([theta.cos(), theta.sin()]),
    })
}

/// RANSAC over 2-point samples, then a total least squares refit on the
/// consensus set of the best sample. The first sample reaching the highest
/// inlier count wins.
pub fn fit_line<T: Scalar, R: Rng>(
    item: usize,
    points: &[[T; 2]],
    params: &RansacParams,
    rng: &mut R,
) -> ItemLineFit<T> {
    let n = points.len();
    let skipped = |reason| ItemLineFit {
        item,
        status: FitStatus::Skipped(reason),
        inliers: vec![false; n],
    };
    if n < params.min_points.max(2) {
        return skipped(SkipReason::TooFewRatings);
    }
    let threshold = inlier_threshold(points, params.threshold_fraction);

    let mut best: Option<(usize, Line<T>)> = None;
    for _ in 0..params.iterations {
        let i = rng.random_range(0..n);
        let mut j = rng.random_range(0..n - 1);
        if j >= i {
            j += 1;
        }
        let Some(line) = through(points[i], points[j]) else {
            continue;
        };
        let count = points.iter().filter(|p| line.distance(**p) <= threshold).count();
        if best.as_ref().is_none_or(|(c, _)| count > *c) {
            best = Some((count, line));
        }
    }
    let Some((_, sample_line)) = best else {
        // every draw hit coincident points; fall back to any distinct pair
        let a = points[0];
        return match points.iter().find(|p| **p != a).and_then(|b| through(a, *b)) {
            Some(line) => finish(item, points, line, threshold),
            None => skipped(SkipReason::Degenerate),
        };
    };
    finish(item, points, sample_line, threshold)
}

fn finish<T: Scalar>(item: usize, points: &[[T; 2]], sample: Line<T>, threshold: T) -> ItemLineFit<T> {
    let inliers: Vec<bool> = points.iter().map(|p| sample.distance(*p) <= threshold).collect();
    let chosen: Vec<[T; 2]> = points
        .iter()
        .zip(&inliers)
        .filter(|(_, &b)| b)
        .map(|(p, _)| *p)
        .collect();
    let line = total_least_squares(&chosen).unwrap_or(sample);
    ItemLineFit {
        item,
        status: FitStatus::Fitted(line),
        inliers,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn rng() -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(3)
    }

    #[test]
    fn collinear_points_are_all_inliers() {
        let pts: Vec<[f64; 2]> = (0..10)
            .map(|i| [i as f64 * 0.3 - 1.0, 2.0 * (i as f64 * 0.3 - 1.0) + 0.5])
            .collect();
        let fit = fit_line(0, &pts, &RansacParams::default(), &mut rng());
        assert_eq!(fit.inlier_count(), 10);
        let line = fit.line().unwrap();
        for p in &pts {
            assert!(line.distance(*p) < 1e-12);
        }
    }

    #[test]
    fn too_few_points_are_skipped() {
        let fit = fit_line(4, &[[0.0, 0.0], [1.0, 1.0]], &RansacParams::default(), &mut rng());
        assert_eq!(fit.status, FitStatus::Skipped(SkipReason::TooFewRatings));
        assert_eq!(fit.item, 4);
    }

    #[test]
    fn coincident_points_are_degenerate() {
        let fit = fit_line(0, &[[1.0, 2.0]; 5], &RansacParams::default(), &mut rng());
        assert_eq!(fit.status, FitStatus::Skipped(SkipReason::Degenerate));
    }

    #[test]
    fn tls_recovers_direction() {
        let pts = [[0.0, 0.0], [1.0, 1.0], [2.0, 2.0], [3.0, 3.0]];
        let l = total_least_squares(&pts).unwrap();
        let h = 0.5f64.sqrt();
        assert_relative_eq!(l.direction[0], h, epsilon = 1e-15);
        assert_relative_eq!(l.direction[1], h, epsilon = 1e-15);
        assert_eq!(l.point, [1.5, 1.5]);
    }

    #[test]
    fn orientation_has_nonnegative_observed_component() {
        let l = through([1.0, 1.0], [0.0, 0.0]).unwrap();
        assert!(l.direction[1] > 0.0);
        let h = through([1.0, 0.0], [0.0, 0.0]).unwrap();
        assert_eq!(h.direction, [1.0, 0.0]);
    }

    #[test]
    fn constant_observed_values_keep_exact_points() {
        let pts = [[0.0, 1.0], [1.0, 1.0], [2.0, 1.0], [3.0, 1.0]];
        let fit = fit_line(0, &pts, &RansacParams::default(), &mut rng());
        assert_eq!(fit.inlier_count(), 4);
    }
}
