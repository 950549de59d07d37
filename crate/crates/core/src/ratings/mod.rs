//! Ratings matrices: construction, filtering, ingestion and normalization.

mod format;
mod normalize;

use std::cmp::Ordering;
use std::io::Write;

pub use format::{load_ratings, read_ratings, DatasetSpec, Format, Preset, PRESETS};
pub use normalize::{
    adjusted_cosine, center_and_normalize, center_and_normalize_with, NormalizedMatrix, SimilarityMatrix,
    DEFAULT_NORM_EPSILON,
};

use crate::linalg::SparseMatrix;
use crate::{Error, Result, Scalar};

/// One observed cell.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Rating<T> {
    pub user: usize,
    pub item: usize,
    pub value: T,
}

/// Sparse user × item ratings with compact indices and the original IDs
/// they were compacted from.
#[derive(Debug, Clone, PartialEq)]
pub struct RatingsMatrix<T> {
    n_users: usize,
    n_items: usize,
    entries: Vec<Rating<T>>,
    user_ids: Vec<String>,
    item_ids: Vec<String>,
}

impl<T: Scalar> RatingsMatrix<T> {
    /// Builds a matrix whose IDs are the decimal indices. Entries are sorted;
    /// duplicates, out-of-range indices and non-finite values are rejected.
    pub fn new(n_users: usize, n_items: usize, entries: Vec<Rating<T>>) -> Result<Self> {
        let user_ids = (0..n_users).map(|u| u.to_string()).collect();
        let item_ids = (0..n_items).map(|i| i.to_string()).collect();
        Self::with_ids(user_ids, item_ids, entries)
    }

    pub fn with_ids(user_ids: Vec<String>, item_ids: Vec<String>, mut entries: Vec<Rating<T>>) -> Result<Self> {
        let (n_users, n_items) = (user_ids.len(), item_ids.len());
        for r in &entries {
            if r.user >= n_users || r.item >= n_items {
                return Err(Error::InvalidMatrix(format!(
                    "cell ({}, {}) outside {n_users} x {n_items}",
                    r.user, r.item
                )));
            }
            if !r.value.is_finite() {
                return Err(Error::InvalidMatrix(format!(
                    "non-finite rating at ({}, {})",
                    r.user, r.item
                )));
            }
        }
        entries.sort_by_key(|r| (r.user, r.item));
        if let Some(w) = entries
            .windows(2)
            .find(|w| (w[0].user, w[0].item) == (w[1].user, w[1].item))
        {
            return Err(Error::InvalidMatrix(format!(
                "duplicate cell ({}, {})",
                w[0].user, w[0].item
            )));
        }
        Ok(Self {
            n_users,
            n_items,
            entries,
            user_ids,
            item_ids,
        })
    }

    pub fn n_users(&self) -> usize {
        self.n_users
    }

    pub fn n_items(&self) -> usize {
        self.n_items
    }

    /// Entries sorted by (user, item).
    pub fn entries(&self) -> &[Rating<T>] {
        &self.entries
    }

    pub fn nnz(&self) -> usize {
        self.entries.len()
    }

    pub fn density(&self) -> f64 {
        self.entries.len() as f64 / (self.n_users as f64 * self.n_items as f64)
    }

    pub fn user_id(&self, user: usize) -> &str {
        &self.user_ids[user]
    }

    pub fn item_id(&self, item: usize) -> &str {
        &self.item_ids[item]
    }

    pub fn user_ids(&self) -> &[String] {
        &self.user_ids
    }

    pub fn item_ids(&self) -> &[String] {
        &self.item_ids
    }

    pub fn get(&self, user: usize, item: usize) -> Option<T> {
        self.entries
            .binary_search_by(|r| (r.user, r.item).cmp(&(user, item)))
            .ok()
            .map(|k| self.entries[k].value)
    }

    pub fn item_counts(&self) -> Vec<usize> {
        let mut c = vec![0; self.n_items];
        for r in &self.entries {
            c[r.item] += 1;
        }
        c
    }

    pub fn user_counts(&self) -> Vec<usize> {
        let mut c = vec![0; self.n_users];
        for r in &self.entries {
            c[r.user] += 1;
        }
        c
    }

    /// Drops items with fewer than `min_rpi` ratings, then users left without
    /// ratings, and compacts both index spaces (original IDs are kept).
    pub fn filter_min_rpi(&self, min_rpi: usize) -> Result<Self> {
        if min_rpi == 0 {
            return Err(Error::Domain {
                name: "min_rpi",
                value: 0.0,
                domain: ">= 1",
            });
        }
        let counts = self.item_counts();
        let kept: Vec<Rating<T>> = self
            .entries
            .iter()
            .filter(|r| counts[r.item] >= min_rpi)
            .copied()
            .collect();
        if kept.is_empty() {
            return Err(Error::EmptyMatrix { min_rpi });
        }
        Ok(self.compacted(kept))
    }

    /// Removes users and items without ratings.
    pub fn compact(&self) -> Self {
        self.compacted(self.entries.clone())
    }

    fn compacted(&self, entries: Vec<Rating<T>>) -> Self {
        let mut user_map = vec![usize::MAX; self.n_users];
        let mut item_map = vec![usize::MAX; self.n_items];
        for r in &entries {
            user_map[r.user] = 0;
            item_map[r.item] = 0;
        }
        let remap = |map: &mut [usize], ids: &[String]| {
            let mut out = Vec::new();
            for (old, slot) in map.iter_mut().enumerate() {
                if *slot == 0 {
                    *slot = out.len();
                    out.push(ids[old].clone());
                }
            }
            out
        };
        let user_ids = remap(&mut user_map, &self.user_ids);
        let item_ids = remap(&mut item_map, &self.item_ids);
        let entries = entries
            .into_iter()
            .map(|r| Rating {
                user: user_map[r.user],
                item: item_map[r.item],
                value: r.value,
            })
            .collect();
        // order-preserving remap keeps entries sorted and unique
        Self {
            n_users: user_ids.len(),
            n_items: item_ids.len(),
            entries,
            user_ids,
            item_ids,
        }
    }

    pub fn to_sparse(&self) -> SparseMatrix<T> {
        SparseMatrix::from_sorted_triplets(
            self.n_users,
            self.n_items,
            self.entries.iter().map(|r| (r.user, r.item, r.value)),
        )
    }

    /// Canonical `user_id,item_id,rating` dump, readable back with [`Format::Csv`].
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let io = |e: csv::Error| Error::io("<csv>", std::io::Error::other(e));
        w.write_record(["user_id", "item_id", "rating"]).map_err(io)?;
        for r in &self.entries {
            w.write_record([
                self.user_ids[r.user].as_str(),
                self.item_ids[r.item].as_str(),
                &r.value.to_string(),
            ])
            .map_err(io)?;
        }
        w.flush().map_err(|e| Error::io("<csv>", e))?;
        Ok(())
    }
}

/// Orders IDs numerically when both parse as integers, otherwise lexically
/// (numeric IDs first).
pub fn natural_id_cmp(a: &str, b: &str) -> Ordering {
    match (a.parse::<u64>(), b.parse::<u64>()) {
        (Ok(x), Ok(y)) => x.cmp(&y),
        (Ok(_), Err(_)) => Ordering::Less,
        (Err(_), Ok(_)) => Ordering::Greater,
        (Err(_), Err(_)) => a.cmp(b),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn r(user: usize, item: usize, value: f64) -> Rating<f64> {
        Rating { user, item, value }
    }

    #[test]
    fn rejects_duplicates_and_out_of_range() {
        assert!(RatingsMatrix::new(2, 2, vec![r(0, 0, 1.0), r(0, 0, 2.0)]).is_err());
        assert!(RatingsMatrix::new(2, 2, vec![r(2, 0, 1.0)]).is_err());
        assert!(RatingsMatrix::new(2, 2, vec![r(0, 0, f64::NAN)]).is_err());
    }

    #[test]
    fn filter_drops_sparse_items_then_empty_users() {
        // item 2 has a single rating, from user 2 who rates nothing else
        let m = RatingsMatrix::new(
            3,
            3,
            vec![r(0, 0, 5.0), r(0, 1, 3.0), r(1, 0, 4.0), r(1, 1, 1.0), r(2, 2, 2.0)],
        )
        .unwrap();
        let f = m.filter_min_rpi(2).unwrap();
        assert_eq!((f.n_users(), f.n_items(), f.nnz()), (2, 2, 4));
        assert_eq!(f.item_ids(), &["0".to_string(), "1".to_string()]);
        assert!(matches!(m.filter_min_rpi(3), Err(Error::EmptyMatrix { min_rpi: 3 })));
    }

    #[test]
    fn min_rpi_one_is_identity_on_valid_matrix() {
        let m = RatingsMatrix::new(2, 2, vec![r(0, 0, 5.0), r(1, 1, 1.0), r(0, 1, 2.0)]).unwrap();
        assert_eq!(m.filter_min_rpi(1).unwrap(), m);
    }

    #[test]
    fn natural_ordering() {
        let mut ids = vec!["10", "9", "b", "a", "100"];
        ids.sort_by(|a, b| natural_id_cmp(a, b));
        assert_eq!(ids, vec!["9", "10", "100", "a", "b"]);
    }

    #[test]
    fn lookup() {
        let m = RatingsMatrix::new(2, 3, vec![r(1, 2, 4.0), r(0, 1, 2.0)]).unwrap();
        assert_eq!(m.get(1, 2), Some(4.0));
        assert_eq!(m.get(0, 2), None);
        assert_eq!(m.entries()[0], r(0, 1, 2.0));
    }
}
