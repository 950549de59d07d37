use super::RatingsMatrix;
use crate::linalg::{DenseMatrix, SparseMatrix};
use crate::{Error, Result, Scalar};

/// Items whose centered column norm falls below this are dropped.
pub const DEFAULT_NORM_EPSILON: f64 = 1e-12;

/// User-centered, item-normalized ratings.
///
/// Column `c` of `matrix` corresponds to item `retained_items[c]` of the source
/// [`RatingsMatrix`]. Only observed cells are stored; a centered value of
/// exactly zero is still stored so the support matches the source.
#[derive(Debug, Clone)]
pub struct NormalizedMatrix<T> {
    pub matrix: SparseMatrix<T>,
    pub user_means: Vec<T>,
    /// Euclidean norm of each retained item's centered column.
    pub item_norms: Vec<T>,
    pub retained_items: Vec<usize>,
    pub dropped_items: Vec<usize>,
}

impl<T: Scalar> NormalizedMatrix<T> {
    pub fn n_users(&self) -> usize {
        use crate::linalg::LinearOperator;
        self.matrix.nrows()
    }

    pub fn n_columns(&self) -> usize {
        use crate::linalg::LinearOperator;
        self.matrix.ncols()
    }
}

pub fn center_and_normalize<T: Scalar>(ratings: &RatingsMatrix<T>) -> Result<NormalizedMatrix<T>> {
    center_and_normalize_with(ratings, T::of(DEFAULT_NORM_EPSILON))
}

pub fn center_and_normalize_with<T: Scalar>(ratings: &RatingsMatrix<T>, epsilon: T) -> Result<NormalizedMatrix<T>> {
    let n_users = ratings.n_users();
    let mut sums = vec![T::zero(); n_users];
    let counts = ratings.user_counts();
    for r in ratings.entries() {
        sums[r.user] += r.value;
    }
    let user_means: Vec<T> = sums
        .iter()
        .zip(&counts)
        .map(|(&s, &c)| if c > 0 { s / T::of_usize(c) } else { T::zero() })
        .collect();

    let centered: Vec<T> = ratings.entries().iter().map(|r| r.value - user_means[r.user]).collect();

    let mut sq = vec![T::zero(); ratings.n_items()];
    for (r, c) in ratings.entries().iter().zip(&centered) {
        sq[r.item] += *c * *c;
    }
    let norms: Vec<T> = sq.iter().map(|s| s.sqrt()).collect();

    let mut column_of = vec![usize::MAX; ratings.n_items()];
    let mut retained_items = Vec::new();
    let mut dropped_items = Vec::new();
    let mut item_norms = Vec::new();
    for (item, &nrm) in norms.iter().enumerate() {
        if nrm >= epsilon && nrm > T::zero() {
            column_of[item] = retained_items.len();
            retained_items.push(item);
            item_norms.push(nrm);
        } else {
            dropped_items.push(item);
        }
    }
    if retained_items.is_empty() {
        return Err(Error::DegenerateMatrix);
    }

    let triplets = ratings
        .entries()
        .iter()
        .zip(&centered)
        .filter(|(r, _)| column_of[r.item] != usize::MAX)
        .map(|(r, c)| {
            let col = column_of[r.item];
            (r.user, col, *c / item_norms[col])
        });
    let matrix = SparseMatrix::from_sorted_triplets(n_users, retained_items.len(), triplets);

    Ok(NormalizedMatrix {
        matrix,
        user_means,
        item_norms,
        retained_items,
        dropped_items,
    })
}

/// Dense item × item adjusted cosine similarity over the retained items.
#[derive(Debug, Clone)]
pub struct SimilarityMatrix<T> {
    /// Source item index of each row/column.
    pub items: Vec<usize>,
    pub values: DenseMatrix<T>,
}

impl<T: Scalar> SimilarityMatrix<T> {
    pub fn get(&self, a: usize, b: usize) -> T {
        self.values[(a, b)]
    }
}

/// `R̂ᵀR̂`: dot products of the normalized item columns.
pub fn adjusted_cosine<T: Scalar>(ratings: &RatingsMatrix<T>) -> Result<SimilarityMatrix<T>> {
    let norm = center_and_normalize(ratings)?;
    let n = norm.retained_items.len();
    let mut values = DenseMatrix::zeros(n, n);
    for u in 0..norm.n_users() {
        let (cols, vals) = norm.matrix.row(u);
        for (a, &ca) in cols.iter().enumerate() {
            for (b, &cb) in cols.iter().enumerate().skip(a) {
                values[(ca, cb)] += vals[a] * vals[b];
            }
        }
    }
    for j in 0..n {
        for i in 0..j {
            values[(j, i)] = values[(i, j)];
        }
    }
    Ok(SimilarityMatrix {
        items: norm.retained_items,
        values,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ratings::Rating;
    use approx::assert_relative_eq;

    fn two_by_two() -> RatingsMatrix<f64> {
        let cells = [(0, 0, 5.0), (0, 1, 3.0), (1, 0, 4.0), (1, 1, 1.0)];
        RatingsMatrix::new(
            2,
            2,
            cells
                .iter()
                .map(|&(user, item, value)| Rating { user, item, value })
                .collect(),
        )
        .unwrap()
    }

    #[test]
    fn user_centering() {
        let n = center_and_normalize(&two_by_two()).unwrap();
        assert_eq!(n.user_means, vec![4.0, 2.5]);
    }

    #[test]
    fn hand_computed_column() {
        // item 0 centered column (1, 1.5), norm sqrt(3.25)
        let n = center_and_normalize(&two_by_two()).unwrap();
        assert_relative_eq!(n.item_norms[0], 3.25f64.sqrt(), epsilon = 1e-15);
        let (rows, vals) = n.matrix.col(0);
        assert_eq!(rows, &[0, 1]);
        assert_relative_eq!(vals[0], 0.5547001962252291, epsilon = 1e-12);
        assert_relative_eq!(vals[1], 0.8320502943378437, epsilon = 1e-12);
    }

    #[test]
    fn constant_rater_item_is_dropped() {
        // user 0 rates both items 3: centered zeros; item 1 only rated by user 0
        let cells = [(0, 0, 3.0), (0, 1, 3.0), (1, 0, 5.0), (1, 2, 1.0)];
        let m = RatingsMatrix::new(
            2,
            3,
            cells
                .iter()
                .map(|&(user, item, value)| Rating { user, item, value })
                .collect(),
        )
        .unwrap();
        let n = center_and_normalize(&m).unwrap();
        assert_eq!(n.dropped_items, vec![1]);
        assert_eq!(n.retained_items, vec![0, 2]);
        // the zero centered entry of user 0 on item 0 stays in the support
        assert_eq!(n.matrix.col(0).0, &[0, 1]);
    }

    #[test]
    fn all_items_dropped_is_degenerate() {
        let m = RatingsMatrix::new(
            1,
            2,
            vec![
                Rating {
                    user: 0,
                    item: 0,
                    value: 2.0,
                },
                Rating {
                    user: 0,
                    item: 1,
                    value: 2.0,
                },
            ],
        )
        .unwrap();
        assert!(matches!(center_and_normalize(&m), Err(Error::DegenerateMatrix)));
        assert!(matches!(adjusted_cosine(&m), Err(Error::DegenerateMatrix)));
    }

    #[test]
    fn self_similarity_and_collinear_items() {
        // item 1 centered column = -(item 0 centered column)
        let cells = [
            (0, 0, 5.0),
            (0, 1, 1.0),
            (1, 0, 1.0),
            (1, 1, 5.0),
            (2, 0, 4.0),
            (2, 1, 2.0),
        ];
        let m = RatingsMatrix::new(
            3,
            2,
            cells
                .iter()
                .map(|&(user, item, value)| Rating { user, item, value })
                .collect(),
        )
        .unwrap();
        let s = adjusted_cosine(&m).unwrap();
        assert_relative_eq!(s.get(0, 0), 1.0, epsilon = 1e-12);
        assert_relative_eq!(s.get(1, 1), 1.0, epsilon = 1e-12);
        assert_relative_eq!(s.get(0, 1), -1.0, epsilon = 1e-12);
    }
}
