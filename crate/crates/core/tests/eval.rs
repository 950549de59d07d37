use fbdeconv::eval::{
    correlation, density_histogram, evaluate, roc, run_pipeline, sweep, write_roc_csv, write_sweep_csv, PipelineParams,
    SweepParameter,
};
use fbdeconv::synthetic::{simulate, SyntheticConfig};
use proptest::prelude::*;

/// P(score_pos > score_neg) + ½ P(tie) over every positive/negative pair.
fn pairwise_auc(scores: &[f64], labels: &[bool]) -> f64 {
    let (mut wins, mut pairs) = (0.0, 0.0);
    for (i, &si) in scores.iter().enumerate() {
        for (j, &sj) in scores.iter().enumerate() {
            if labels[i] && !labels[j] {
                pairs += 1.0;
                if si > sj {
                    wins += 1.0;
                } else if si == sj {
                    wins += 0.5;
                }
            }
        }
    }
    wins / pairs
}

proptest! {
    #[test]
    fn curve_area_equals_pairwise_area(
        cells in prop::collection::vec((0u8..12, any::<bool>()), 2..400),
    ) {
        // coarse scores so ties are frequent
        let scores: Vec<f64> = cells.iter().map(|c| c.0 as f64 / 4.0).collect();
        let labels: Vec<bool> = cells.iter().map(|c| c.1).collect();
        prop_assume!(labels.iter().any(|&l| l) && labels.iter().any(|&l| !l));
        let curve = roc(&scores, &labels).unwrap();
        prop_assert!((curve.auc - pairwise_auc(&scores, &labels)).abs() <= 1e-12);

        let first = curve.points[0];
        let last = *curve.points.last().unwrap();
        prop_assert_eq!((first.fpr, first.tpr), (0.0, 0.0));
        prop_assert_eq!((last.fpr, last.tpr), (1.0, 1.0));
        let mut trapezoid = 0.0;
        for w in curve.points.windows(2) {
            prop_assert!(w[1].fpr >= w[0].fpr && w[1].tpr >= w[0].tpr);
            trapezoid += (w[1].fpr - w[0].fpr) * (w[1].tpr + w[0].tpr) / 2.0;
        }
        prop_assert!((trapezoid - curve.auc).abs() <= 1e-12);
    }

    #[test]
    fn histogram_conserves_counts(
        pairs in prop::collection::vec((-3.0..3.0f64, -1.0..8.0f64), 1..300),
        bins in 2usize..20,
    ) {
        let h = density_histogram(&pairs, bins).unwrap();
        prop_assert_eq!(h.total(), pairs.len() as u64);
        prop_assert_eq!(h.counts.len(), bins);
    }
}

#[test]
fn histogram_csv_layout() {
    let pairs = [(0.0, 0.0), (1.0, 2.0), (0.5, 1.5), (1.0, 1.0)];
    let h = density_histogram(&pairs, 2).unwrap();
    let mut buf = Vec::new();
    h.write_csv(&mut buf).unwrap();
    let text = String::from_utf8(buf).unwrap();
    let rows: Vec<Vec<&str>> = text.lines().map(|l| l.split(',').collect()).collect();
    assert_eq!(rows.len(), 4);
    assert_eq!((rows[0][0], rows[0].len()), ("observed_edges", 4));
    assert_eq!((rows[1][0], rows[1].len()), ("deconvolved_edges", 4));
    assert_eq!(rows[2].len(), 3);
    let counted: u64 = rows[2..].iter().flat_map(|r| &r[1..]).map(|c| c.parse::<u64>().unwrap()).sum();
    assert_eq!(counted, 4);
}

#[test]
fn five_point_correlation() {
    let pairs = [(1.0, 2.0), (2.0, 1.0), (3.0, 4.0), (4.0, 3.0), (5.0, 5.0)];
    let n = pairs.len() as f64;
    let sx: f64 = pairs.iter().map(|p| p.0).sum();
    let sy: f64 = pairs.iter().map(|p| p.1).sum();
    let sxy: f64 = pairs.iter().map(|p| p.0 * p.1).sum();
    let sxx: f64 = pairs.iter().map(|p| p.0 * p.0).sum();
    let syy: f64 = pairs.iter().map(|p| p.1 * p.1).sum();
    let oracle = (n * sxy - sx * sy) / ((n * sxx - sx * sx) * (n * syy - sy * sy)).sqrt();
    assert!((oracle - 0.8).abs() < 1e-15);
    assert!((correlation(&pairs).unwrap() - oracle).abs() <= 1e-12);
}

fn small(seed: u64) -> SyntheticConfig {
    SyntheticConfig {
        n_users: 300,
        n_items: 40,
        iterations: 4,
        seed,
        ..SyntheticConfig::default()
    }
}

#[test]
fn induced_cells_score_higher_on_average() {
    let data = simulate(&small(1)).unwrap();
    let (_, report) = run_pipeline(&data, &PipelineParams::default()).unwrap();
    let (mut induced, mut genuine) = ((0.0, 0.0), (0.0, 0.0));
    for r in &report.ratings {
        let slot = if data.label_of(r.user, r.item).unwrap().is_induced() {
            &mut induced
        } else {
            &mut genuine
        };
        slot.0 += r.score;
        slot.1 += 1.0;
    }
    assert!(induced.0 / induced.1 > genuine.0 / genuine.1);
}

#[test]
fn no_induced_cells_is_a_clear_error() {
    let data = simulate(&SyntheticConfig {
        iterations: 1,
        ..small(3)
    })
    .unwrap();
    let mut quiet = data.clone();
    quiet
        .labels
        .iter_mut()
        .for_each(|l| *l = fbdeconv::synthetic::Label::TruePreference);
    let err = evaluate(&quiet, &PipelineParams::default()).unwrap_err();
    assert!(err.to_string().contains("positive"), "{err}");
}

#[test]
fn alpha_sweep_writes_one_curve_per_value() {
    let grid = [0.25, 0.5, 1.0];
    let result = sweep(&small(4), &PipelineParams::default(), SweepParameter::Alpha, &grid).unwrap();
    assert_eq!(result.points.len(), 3);
    for (p, v) in result.points.iter().zip(grid) {
        assert_eq!(p.value, v);
        let mut buf = Vec::new();
        write_roc_csv(&mut buf, &p.evaluation.roc).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("threshold,fpr,tpr\n"));
        assert_eq!(text.lines().count(), p.evaluation.roc.points.len() + 1);
    }
    let mut buf = Vec::new();
    write_sweep_csv(&mut buf, &result.rows()).unwrap();
    let text = String::from_utf8(buf).unwrap();
    assert_eq!(text.lines().next(), Some("param_value,auc,rs_score"));
    assert_eq!(text.lines().count(), 4);
    // one shared simulation
    let effects: Vec<f64> = result.points.iter().map(|p| p.evaluation.true_effect).collect();
    assert!(effects.windows(2).all(|w| w[0] == w[1]));
}

#[test]
fn sweeps_are_reproducible() {
    let grid = [0.05, 0.1];
    let a = sweep(&small(8), &PipelineParams::default(), SweepParameter::Gamma, &grid).unwrap();
    let b = sweep(&small(8), &PipelineParams::default(), SweepParameter::Gamma, &grid).unwrap();
    assert_eq!(a.rows(), b.rows());
    for (p, q) in a.points.iter().zip(&b.points) {
        assert_eq!(p.evaluation.roc, q.evaluation.roc);
    }
}
