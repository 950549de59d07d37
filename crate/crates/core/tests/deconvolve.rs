use approx::assert_relative_eq;
use fbdeconv::deconvolve::{deconvolve, sigma_observed, sigma_true, truncated_svd, SpectralDecomposition, SvdOptions};
use fbdeconv::linalg::{DenseMatrix, SparseMatrix};
use fbdeconv::ratings::{center_and_normalize, Rating, RatingsMatrix};
use nalgebra::DMatrix;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn random_dense(m: usize, n: usize, seed: u64) -> DenseMatrix<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    DenseMatrix::from_fn(m, n, |_, _| rng.random_range(-1.0..1.0))
}

fn oracle(a: &DenseMatrix<f64>) -> nalgebra::SVD<f64, nalgebra::Dyn, nalgebra::Dyn> {
    DMatrix::from_column_slice(a.nrows(), a.ncols(), a.as_slice()).svd(true, true)
}

fn sorted_oracle_sigma(a: &DenseMatrix<f64>) -> Vec<f64> {
    let mut s: Vec<f64> = oracle(a).singular_values.iter().copied().collect();
    s.sort_by(|x, y| y.partial_cmp(x).unwrap());
    s
}

fn check_triplets(a: &DenseMatrix<f64>, d: &SpectralDecomposition<f64>, tol: f64) {
    assert!(d.u.orthonormality_error() < 1e-10);
    assert!(d.v.orthonormality_error() < 1e-10);
    for l in 0..d.k() {
        let av = a.matmul(&DenseMatrix::from_column_major(a.ncols(), 1, d.v.col(l).to_vec()));
        for i in 0..a.nrows() {
            assert!((av[(i, 0)] - d.sigma[l] * d.u[(i, l)]).abs() < tol);
        }
    }
}

#[test]
fn matches_dense_oracle_on_random_50_by_20() {
    let a = random_dense(50, 20, 1);
    let d = truncated_svd(&a, 5, &SvdOptions::default()).unwrap();
    let want = sorted_oracle_sigma(&a);
    for l in 0..5 {
        assert_relative_eq!(d.sigma[l], want[l], max_relative = 1e-8);
    }
    check_triplets(&a, &d, 1e-8);
    assert!(d.residual < 1e-8);
}

#[test]
fn wide_input_matches_oracle() {
    let a = random_dense(15, 60, 2);
    let d = truncated_svd(&a, 6, &SvdOptions::default()).unwrap();
    let want = sorted_oracle_sigma(&a);
    for l in 0..6 {
        assert_relative_eq!(d.sigma[l], want[l], max_relative = 1e-8);
    }
    check_triplets(&a, &d, 1e-8);
}

#[test]
fn full_rank_request_is_exact() {
    let a = random_dense(12, 9, 3);
    let d = truncated_svd(&a, 9, &SvdOptions::default()).unwrap();
    let back = d.to_dense_with(&d.sigma);
    for j in 0..9 {
        for i in 0..12 {
            assert_relative_eq!(back[(i, j)], a[(i, j)], epsilon = 1e-12);
        }
    }
}

#[test]
fn low_rank_operator_stops_at_its_rank() {
    // rank 3, with room for the Krylov space to keep growing
    let x = random_dense(200, 3, 4);
    let y = random_dense(3, 120, 5);
    let a = x.matmul(&y);
    let d = truncated_svd(&a, 8, &SvdOptions::default()).unwrap();
    assert_eq!(d.k(), 3);
    assert!(d.rank_deficient());
    let want = sorted_oracle_sigma(&a);
    for l in 0..3 {
        assert_relative_eq!(d.sigma[l], want[l], max_relative = 1e-10);
    }
}

#[test]
fn repeated_top_singular_value_is_found_twice() {
    let a = DenseMatrix::from_fn(40, 30, |i, j| {
        if i == j {
            if i < 2 {
                5.0
            } else {
                1.0 / (1.0 + i as f64)
            }
        } else {
            0.0
        }
    });
    let d = truncated_svd(&a, 3, &SvdOptions::default()).unwrap();
    assert_relative_eq!(d.sigma[0], 5.0, epsilon = 1e-10);
    assert_relative_eq!(d.sigma[1], 5.0, epsilon = 1e-10);
    assert_relative_eq!(d.sigma[2], 1.0 / 3.0, epsilon = 1e-10);
}

#[test]
fn sparse_and_dense_agree() {
    let a = random_dense(80, 35, 6);
    let trip: Vec<_> = (0..80)
        .flat_map(|i| (0..35).map(move |j| (i, j)))
        .filter(|&(i, j)| (i * 7 + j * 5) % 3 != 0)
        .map(|(i, j)| (i, j, a[(i, j)]))
        .collect();
    let s = SparseMatrix::from_sorted_triplets(80, 35, trip);
    let ds = truncated_svd(&s, 4, &SvdOptions::default()).unwrap();
    let dd = truncated_svd(&s.to_dense(), 4, &SvdOptions::default()).unwrap();
    for l in 0..4 {
        assert_relative_eq!(ds.sigma[l], dd.sigma[l], max_relative = 1e-10);
    }
}

#[test]
fn single_precision_runs() {
    let a = random_dense(30, 10, 7);
    let a32 = DenseMatrix::from_fn(30, 10, |i, j| a[(i, j)] as f32);
    let d = truncated_svd(&a32, 3, &SvdOptions::default()).unwrap();
    let want = sorted_oracle_sigma(&a);
    for l in 0..3 {
        assert_relative_eq!(d.sigma[l] as f64, want[l], max_relative = 1e-4);
    }
}

fn small_ratings() -> RatingsMatrix<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let mut cells = Vec::new();
    for u in 0..30 {
        for i in 0..12 {
            if rng.random_bool(0.6) {
                cells.push(Rating {
                    user: u,
                    item: i,
                    value: rng.random_range(1..=5) as f64,
                });
            }
        }
    }
    RatingsMatrix::new(30, 12, cells).unwrap()
}

#[test]
fn cells_match_dense_reconstruction() {
    let norm = center_and_normalize(&small_ratings()).unwrap();
    let r = deconvolve(&norm, 0.5, 4, &SvdOptions::default()).unwrap();
    let obs = r.spectrum.to_dense_with(&r.spectrum.sigma);
    let tru = r.spectrum.to_dense_with(&r.sigma_true);
    assert_eq!(r.cells.len(), norm.matrix.nnz());
    for c in &r.cells {
        assert_relative_eq!(c.observed, obs[(c.user, c.column)], epsilon = 1e-12);
        assert_relative_eq!(c.deconvolved, tru[(c.user, c.column)], epsilon = 1e-12);
    }
}

#[test]
fn cells_follow_support_order() {
    let norm = center_and_normalize(&small_ratings()).unwrap();
    let r = deconvolve(&norm, 1.0, 3, &SvdOptions::default()).unwrap();
    let support: Vec<(usize, usize)> = norm.matrix.iter().map(|(i, j, _)| (i, j)).collect();
    let cells: Vec<(usize, usize)> = r.cells.iter().map(|c| (c.user, c.column)).collect();
    assert_eq!(cells, support);
}

proptest! {
    #[test]
    fn deconvolved_value_is_bounded(s in 0.0f64..1e8, a in 1e-9f64..=1.0) {
        let t = sigma_true(s, a).unwrap();
        prop_assert!(t >= 0.0);
        prop_assert!(t <= s);
        prop_assert!(t < 1.0 / a.sqrt());
    }

    #[test]
    fn deconvolution_is_monotone(s1 in 0.0f64..1e4, ds in 1e-6f64..1e3, a in 1e-6f64..=1.0) {
        prop_assert!(sigma_true(s1 + ds, a).unwrap() >= sigma_true(s1, a).unwrap());
    }

    #[test]
    fn forward_inverts_deconvolution(s in 0.0f64..1e3, a in 1e-6f64..=1.0) {
        let t = sigma_true(s, a).unwrap();
        let back = sigma_observed(t, a).unwrap();
        prop_assert!((back - s).abs() <= 1e-12 * s.max(1.0) * (1.0 + a.sqrt() * s));
    }

    #[test]
    fn normalized_columns_have_unit_norm(seed in 0u64..1000) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let cells: Vec<_> = (0..8)
            .flat_map(|u| (0..5).map(move |i| (u, i)))
            .filter(|_| rng.random_bool(0.7))
            .map(|(user, item)| Rating { user, item, value: ((user * 3 + item * 7) % 5 + 1) as f64 })
            .collect();
        prop_assume!(!cells.is_empty());
        let m = RatingsMatrix::new(8, 5, cells).unwrap();
        if let Ok(n) = center_and_normalize(&m) {
            for c in 0..n.n_columns() {
                let (_, vals) = n.matrix.col(c);
                let norm: f64 = vals.iter().map(|v| v * v).sum::<f64>().sqrt();
                prop_assert!((norm - 1.0).abs() < 1e-12);
            }
        }
    }
}
