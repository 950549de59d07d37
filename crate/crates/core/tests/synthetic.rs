use std::collections::HashMap;

use fbdeconv::ratings::{Rating, RatingsMatrix};
use fbdeconv::synthetic::{cf_predictions, generate_true, run_recommender, simulate, Label, SyntheticConfig};

fn hand_matrix() -> RatingsMatrix<f64> {
    // 0 marks an unrated cell
    let grid = [[5.0, 3.0, 0.0], [4.0, 0.0, 2.0], [0.0, 1.0, 4.0], [2.0, 5.0, 0.0]];
    let mut entries = Vec::new();
    for (user, row) in grid.iter().enumerate() {
        for (item, &value) in row.iter().enumerate() {
            if value > 0.0 {
                entries.push(Rating { user, item, value });
            }
        }
    }
    RatingsMatrix::new(4, 3, entries).unwrap()
}

#[test]
fn one_prediction_step_matches_spreadsheet() {
    let grid = [[5.0, 3.0, 0.0], [4.0, 0.0, 2.0], [0.0, 1.0, 4.0], [2.0, 5.0, 0.0f64]];
    let col = |i: usize| -> Vec<f64> { grid.iter().map(|r| r[i]).collect() };
    let cos = |i: usize, j: usize| {
        let (a, b) = (col(i), col(j));
        let d: f64 = a.iter().zip(&b).map(|(x, y)| x * y).sum();
        d / (a.iter().map(|x| x * x).sum::<f64>().sqrt() * b.iter().map(|x| x * x).sum::<f64>().sqrt())
    };
    let mut expected = HashMap::new();
    for u in 0..4 {
        for i in 0..3 {
            if grid[u][i] != 0.0 {
                continue;
            }
            let (mut num, mut den) = (0.0, 0.0);
            for j in (0..3).filter(|&j| grid[u][j] != 0.0) {
                num += cos(i, j) * grid[u][j];
                den += cos(i, j).abs();
            }
            expected.insert((u, i), num / den);
        }
    }

    let got = cf_predictions(&hand_matrix());
    assert_eq!(got.len(), expected.len());
    for p in got {
        let e = expected[&(p.user, p.item)];
        assert!(
            (p.value - e).abs() <= 1e-10,
            "({}, {}): {} vs {e}",
            p.user,
            p.item,
            p.value
        );
    }
}

fn small(seed: u64) -> SyntheticConfig {
    SyntheticConfig {
        n_users: 200,
        n_items: 40,
        iterations: 4,
        seed,
        ..SyntheticConfig::default()
    }
}

#[test]
fn labels_partition_observed_cells() {
    let data = simulate(&small(2)).unwrap();
    assert_eq!(data.labels.len(), data.r_obs.nnz());
    let accepted: usize = data.rounds.iter().map(|r| r.accepted).sum();
    assert_eq!(data.induced_count(), accepted);
    assert_eq!(data.r_obs.nnz(), data.r_true.nnz() + accepted);
    for t in data.r_true.entries() {
        assert_eq!(data.r_obs.get(t.user, t.item), Some(t.value));
        assert_eq!(data.label_of(t.user, t.item), Some(Label::TruePreference));
    }
    for (r, l) in data.r_obs.entries().iter().zip(&data.labels) {
        assert_eq!(l.is_induced(), data.r_true.get(r.user, r.item).is_none());
        assert!((1.0..=5.0).contains(&r.value) && r.value.fract() == 0.0);
    }
}

#[test]
fn density_grows_past_sampling_rate() {
    let cfg = SyntheticConfig::default();
    let data = simulate(&cfg).unwrap();
    assert!(data.r_obs.density() > cfg.gamma);
    let mut last = data.r_true.density();
    for round in &data.rounds {
        assert!(round.density >= last);
        last = round.density;
    }
}

#[test]
fn identical_seeds_give_identical_datasets() {
    let a = simulate(&small(5)).unwrap();
    let b = simulate(&small(5)).unwrap();
    assert_eq!(a.r_obs.entries(), b.r_obs.entries());
    assert_eq!(a.labels, b.labels);
    assert_eq!(a.rounds, b.rounds);
    let c = simulate(&small(6)).unwrap();
    assert_ne!(a.r_obs.entries(), c.r_obs.entries());
}

#[test]
fn results_do_not_depend_on_thread_count() {
    let cfg = small(9);
    let run = |threads| {
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .unwrap()
            .install(|| simulate(&cfg).unwrap())
    };
    let (a, b) = (run(1), run(3));
    assert_eq!(a.r_obs.entries(), b.r_obs.entries());
    assert_eq!(a.labels, b.labels);
}

#[test]
fn larger_exponent_favours_high_predictions() {
    // mean number of accepted 5s per dataset
    let fives = |e: f64| {
        (0..20)
            .map(|s| {
                let cfg = SyntheticConfig { e, ..small(100 + s) };
                let r_true = generate_true(&cfg).unwrap();
                let data = run_recommender(&r_true, &cfg).unwrap();
                data.r_obs
                    .entries()
                    .iter()
                    .zip(&data.labels)
                    .filter(|(r, l)| l.is_induced() && r.value == 5.0)
                    .count() as f64
            })
            .sum::<f64>()
            / 20.0
    };
    let counts: Vec<f64> = [0.0, 2.0, 8.0].into_iter().map(fives).collect();
    assert!(counts.windows(2).all(|w| w[0] <= w[1]), "{counts:?}");
}
