//! Detection quality on simulated data, and plot-ready summaries.

use std::io::Write;

use rayon::prelude::*;

use crate::deconvolve::{deconvolve, DeconvolutionResult, SvdOptions};
use crate::ratings::center_and_normalize;
use crate::scoring::{score, RsScore, ScoreReport, ScoringParams};
use crate::synthetic::{simulate, SyntheticConfig, SyntheticDataset};
use crate::{seeds, Error, Result, Scalar};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RocPoint {
    /// Cells scoring at least this are called positive; `+inf` for the origin.
    pub threshold: f64,
    pub fpr: f64,
    pub tpr: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RocCurve {
    /// From (0, 0) to (1, 1), one point per distinct score.
    pub points: Vec<RocPoint>,
    pub auc: f64,
}

/// ROC over descending thresholds with tied scores grouped, and its
/// trapezoidal area (ties earn half credit).
pub fn roc<T: Scalar>(scores: &[T], labels: &[bool]) -> Result<RocCurve> {
    if scores.len() != labels.len() {
        return Err(Error::InvalidArgument(format!(
            "{} scores for {} labels",
            scores.len(),
            labels.len()
        )));
    }
    let positives = labels.iter().filter(|&&l| l).count();
    let negatives = labels.len() - positives;
    if positives == 0 || negatives == 0 {
        return Err(Error::SingleClass { positives, negatives });
    }
    if scores.iter().any(|s| !s.is_finite()) {
        return Err(Error::InvalidArgument("non-finite score".into()));
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[b].partial_cmp(&scores[a]).unwrap());

    let (p, n) = (positives as f64, negatives as f64);
    let mut points = vec![RocPoint {
        threshold: f64::INFINITY,
        fpr: 0.0,
        tpr: 0.0,
    }];
    let (mut tp, mut fp) = (0usize, 0usize);
    let mut auc = 0.0;
    let mut k = 0;
    while k < order.len() {
        let t = scores[order[k]];
        let (tp0, fp0) = (tp, fp);
        while k < order.len() && scores[order[k]] == t {
            if labels[order[k]] {
                tp += 1;
            } else {
                fp += 1;
            }
            k += 1;
        }
        auc += (fp - fp0) as f64 * (tp + tp0) as f64 / 2.0;
        points.push(RocPoint {
            threshold: t.as_f64(),
            fpr: fp as f64 / n,
            tpr: tp as f64 / p,
        });
    }
    Ok(RocCurve {
        points,
        auc: auc / (p * n),
    })
}

/// Pearson correlation.
pub fn correlation<T: Scalar>(pairs: &[(T, T)]) -> Result<f64> {
    if pairs.len() < 2 {
        return Err(Error::EmptyInput("correlation needs at least two pairs"));
    }
    let n = pairs.len() as f64;
    let mx = pairs.iter().map(|p| p.0.as_f64()).sum::<f64>() / n;
    let my = pairs.iter().map(|p| p.1.as_f64()).sum::<f64>() / n;
    let (mut sxx, mut syy, mut sxy) = (0.0, 0.0, 0.0);
    for (x, y) in pairs {
        let (dx, dy) = (x.as_f64() - mx, y.as_f64() - my);
        sxx += dx * dx;
        syy += dy * dy;
        sxy += dx * dy;
    }
    if sxx == 0.0 {
        return Err(Error::ZeroVariance("first"));
    }
    if syy == 0.0 {
        return Err(Error::ZeroVariance("second"));
    }
    Ok((sxy / (sxx.sqrt() * syy.sqrt())).clamp(-1.0, 1.0))
}

/// Joint histogram of (observed, deconvolved) pairs.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityHistogram {
    /// `bins + 1` edges each.
    pub observed_edges: Vec<f64>,
    pub deconvolved_edges: Vec<f64>,
    /// `counts[i][j]`: observed bin `i`, deconvolved bin `j`.
    pub counts: Vec<Vec<u64>>,
}

impl DensityHistogram {
    pub fn total(&self) -> u64 {
        self.counts.iter().flatten().sum()
    }

    /// Two header rows with the bin edges, then one row of counts per observed bin.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        // edge rows are one field longer than count rows
        let mut w = csv::WriterBuilder::new().flexible(true).from_writer(out);
        let err = |e: csv::Error| Error::io("<csv>", std::io::Error::other(e));
        let edges = |name: &str, e: &[f64]| {
            std::iter::once(name.to_string())
                .chain(e.iter().map(|x| x.to_string()))
                .collect::<Vec<_>>()
        };
        w.write_record(edges("observed_edges", &self.observed_edges))
            .map_err(err)?;
        w.write_record(edges("deconvolved_edges", &self.deconvolved_edges))
            .map_err(err)?;
        for (i, row) in self.counts.iter().enumerate() {
            let rec: Vec<String> = std::iter::once(format!("observed_bin_{i}"))
                .chain(row.iter().map(|c| c.to_string()))
                .collect();
            w.write_record(rec).map_err(err)?;
        }
        w.flush().map_err(|e| Error::io("<csv>", e))
    }
}

fn edges(lo: f64, hi: f64, bins: usize) -> Vec<f64> {
    let (lo, hi) = if hi > lo { (lo, hi) } else { (lo - 0.5, hi + 0.5) };
    (0..=bins)
        .map(|b| {
            if b == bins {
                hi
            } else {
                lo + (hi - lo) * b as f64 / bins as f64
            }
        })
        .collect()
}

fn bin_of(v: f64, e: &[f64]) -> usize {
    let bins = e.len() - 1;
    let (lo, hi) = (e[0], e[bins]);
    let b = ((v - lo) / (hi - lo) * bins as f64).floor();
    (b.max(0.0) as usize).min(bins - 1)
}

/// Uniform bins over each axis's range; the maximum falls in the last bin and
/// a constant axis is widened by ±0.5.
pub fn density_histogram<T: Scalar>(pairs: &[(T, T)], bins: usize) -> Result<DensityHistogram> {
    if pairs.is_empty() {
        return Err(Error::EmptyInput("histogram needs at least one pair"));
    }
    if bins < 2 {
        return Err(Error::InvalidArgument("histogram needs at least two bins".into()));
    }
    let range = |f: &dyn Fn(&(T, T)) -> f64| {
        pairs.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), p| {
            let v = f(p);
            (lo.min(v), hi.max(v))
        })
    };
    let (olo, ohi) = range(&|p| p.0.as_f64());
    let (dlo, dhi) = range(&|p| p.1.as_f64());
    let observed_edges = edges(olo, ohi, bins);
    let deconvolved_edges = edges(dlo, dhi, bins);
    let mut counts = vec![vec![0u64; bins]; bins];
    for (o, d) in pairs {
        counts[bin_of(o.as_f64(), &observed_edges)][bin_of(d.as_f64(), &deconvolved_edges)] += 1;
    }
    Ok(DensityHistogram {
        observed_edges,
        deconvolved_edges,
        counts,
    })
}

/// Settings of the deconvolve-and-score pipeline run on simulated data.
#[derive(Debug, Clone)]
pub struct PipelineParams {
    pub alpha: f64,
    /// `None` keeps every singular value (full rank).
    pub k: Option<usize>,
    pub svd: SvdOptions<f64>,
    pub scoring: ScoringParams,
    /// Bins per axis of [`Evaluation::histogram`].
    pub histogram_bins: usize,
}

impl Default for PipelineParams {
    fn default() -> Self {
        Self {
            alpha: 1.0,
            k: None,
            svd: SvdOptions::default(),
            scoring: ScoringParams::default(),
            histogram_bins: 20,
        }
    }
}

/// Detection quality of one pipeline run against known labels.
#[derive(Debug, Clone)]
pub struct Evaluation {
    pub roc: RocCurve,
    pub rs: RsScore,
    /// Pearson correlation of observed and deconvolved values at scored cells.
    pub correlation: Option<f64>,
    /// Fraction of observed cells the recommender added.
    pub true_effect: f64,
    pub histogram: DensityHistogram,
}

pub fn run_pipeline(
    data: &SyntheticDataset,
    params: &PipelineParams,
) -> Result<(DeconvolutionResult<f64>, ScoreReport<f64>)> {
    let normalized = center_and_normalize(&data.r_obs)?;
    let full = normalized.n_users().min(normalized.n_columns());
    let k = params.k.unwrap_or(full).min(full);
    let d = deconvolve(&normalized, params.alpha, k, &params.svd)?;
    let s = score(&d, &params.scoring)?;
    Ok((d, s))
}

/// Runs the pipeline on `data.r_obs` and scores its output against the labels.
pub fn evaluate(data: &SyntheticDataset, params: &PipelineParams) -> Result<Evaluation> {
    let (_, report) = run_pipeline(data, params)?;
    evaluate_report(data, &report, params.histogram_bins)
}

pub fn evaluate_report(data: &SyntheticDataset, report: &ScoreReport<f64>, bins: usize) -> Result<Evaluation> {
    let labels: Vec<bool> = report
        .ratings
        .iter()
        .map(|r| {
            data.label_of(r.user, r.item)
                .expect("scored cells are observed cells")
                .is_induced()
        })
        .collect();
    let scores: Vec<f64> = report.ratings.iter().map(|r| r.score).collect();
    let pairs: Vec<(f64, f64)> = report.ratings.iter().map(|r| (r.observed, r.deconvolved)).collect();
    Ok(Evaluation {
        roc: roc(&scores, &labels)?,
        rs: report.rs,
        correlation: correlation(&pairs).ok(),
        true_effect: data.true_effect(),
        histogram: density_histogram(&pairs, bins)?,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SweepParameter {
    Gamma,
    Alpha,
    E,
}

impl SweepParameter {
    pub fn name(self) -> &'static str {
        match self {
            SweepParameter::Gamma => "gamma",
            SweepParameter::Alpha => "alpha",
            SweepParameter::E => "e",
        }
    }
}

impl std::str::FromStr for SweepParameter {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "gamma" => Ok(SweepParameter::Gamma),
            "alpha" => Ok(SweepParameter::Alpha),
            "e" => Ok(SweepParameter::E),
            _ => Err(Error::InvalidArgument(format!(
                "unknown sweep parameter {s:?} (gamma, alpha, e)"
            ))),
        }
    }
}

#[derive(Debug, Clone)]
pub struct SweepPoint {
    pub value: f64,
    pub evaluation: Evaluation,
}

#[derive(Debug, Clone)]
pub struct SweepResult {
    pub parameter: SweepParameter,
    pub points: Vec<SweepPoint>,
}

fn check_grid(grid: &[f64]) -> Result<()> {
    if grid.is_empty() {
        return Err(Error::EmptyInput("sweep grid"));
    }
    let increasing = grid.windows(2).all(|w| w[0] < w[1]);
    let decreasing = grid.windows(2).all(|w| w[0] > w[1]);
    if !(increasing || decreasing) || grid.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidArgument("sweep grid must be strictly monotone".into()));
    }
    Ok(())
}

/// Evaluates the pipeline at each grid value. Alpha only affects the
/// deconvolution, so one simulation (seeded by the base seed) serves the
/// whole alpha grid; other parameters get a fresh simulation per point,
/// seeded from (base seed, grid index).
pub fn sweep(
    base: &SyntheticConfig,
    pipeline: &PipelineParams,
    parameter: SweepParameter,
    grid: &[f64],
) -> Result<SweepResult> {
    check_grid(grid)?;
    let shared = match parameter {
        SweepParameter::Alpha => Some(simulate(base)?),
        _ => None,
    };
    let points = grid
        .par_iter()
        .enumerate()
        .map(|(idx, &value)| {
            let mut pipe = pipeline.clone();
            let evaluation = match &shared {
                Some(data) => {
                    pipe.alpha = value;
                    evaluate(data, &pipe)?
                }
                None => {
                    let mut cfg = base.clone();
                    cfg.seed = seeds::derive_seed(base.seed, &[idx as u64]);
                    match parameter {
                        SweepParameter::Gamma => cfg.gamma = value,
                        SweepParameter::E => cfg.e = value,
                        SweepParameter::Alpha => unreachable!(),
                    }
                    evaluate(&simulate(&cfg)?, &pipe)?
                }
            };
            Ok(SweepPoint { value, evaluation })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(SweepResult { parameter, points })
}

/// Means over seeds of one sweep grid.
#[derive(Debug, Clone)]
pub struct SeedAveragedSweep {
    pub parameter: SweepParameter,
    pub grid: Vec<f64>,
    pub mean_auc: Vec<f64>,
    pub mean_rs: Vec<f64>,
    pub mean_true_effect: Vec<f64>,
    pub runs: Vec<SweepResult>,
}

/// Repeats [`sweep`] with base seeds derived from `(base.seed, seed index)`.
pub fn sweep_seeds(
    base: &SyntheticConfig,
    pipeline: &PipelineParams,
    parameter: SweepParameter,
    grid: &[f64],
    n_seeds: usize,
) -> Result<SeedAveragedSweep> {
    if n_seeds == 0 {
        return Err(Error::InvalidArgument("need at least one seed".into()));
    }
    let runs = (0..n_seeds)
        .into_par_iter()
        .map(|s| {
            let cfg = SyntheticConfig {
                seed: seeds::derive_seed(base.seed, &[u64::MAX, s as u64]),
                ..base.clone()
            };
            sweep(&cfg, pipeline, parameter, grid)
        })
        .collect::<Result<Vec<_>>>()?;
    let mean = |f: &dyn Fn(&Evaluation) -> f64| -> Vec<f64> {
        (0..grid.len())
            .map(|g| runs.iter().map(|r| f(&r.points[g].evaluation)).sum::<f64>() / n_seeds as f64)
            .collect()
    };
    Ok(SeedAveragedSweep {
        parameter,
        grid: grid.to_vec(),
        mean_auc: mean(&|e| e.roc.auc),
        mean_rs: mean(&|e| e.rs.value),
        mean_true_effect: mean(&|e| e.true_effect),
        runs,
    })
}

fn csv_err(e: csv::Error) -> Error {
    Error::io("<csv>", std::io::Error::other(e))
}

/// `threshold,fpr,tpr`
pub fn write_roc_csv<W: Write>(out: W, curve: &RocCurve) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["threshold", "fpr", "tpr"]).map_err(csv_err)?;
    for p in &curve.points {
        w.write_record([p.threshold.to_string(), p.fpr.to_string(), p.tpr.to_string()])
            .map_err(csv_err)?;
    }
    w.flush().map_err(|e| Error::io("<csv>", e))
}

/// `param_value,auc,rs_score`
pub fn write_sweep_csv<W: Write>(out: W, rows: &[(f64, f64, f64)]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["param_value", "auc", "rs_score"]).map_err(csv_err)?;
    for (v, auc, rs) in rows {
        w.write_record([v.to_string(), auc.to_string(), rs.to_string()])
            .map_err(csv_err)?;
    }
    w.flush().map_err(|e| Error::io("<csv>", e))
}

impl SweepResult {
    pub fn rows(&self) -> Vec<(f64, f64, f64)> {
        self.points
            .iter()
            .map(|p| (p.value, p.evaluation.roc.auc, p.evaluation.rs.value))
            .collect()
    }
}

impl SeedAveragedSweep {
    pub fn rows(&self) -> Vec<(f64, f64, f64)> {
        (0..self.grid.len())
            .map(|g| (self.grid[g], self.mean_auc[g], self.mean_rs[g]))
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn separating_and_constant_scores() {
        let labels = [true, true, false, false];
        assert_eq!(roc(&[0.9, 0.8, 0.2, 0.1], &labels).unwrap().auc, 1.0);
        assert_eq!(roc(&[0.5; 4], &labels).unwrap().auc, 0.5);
        assert_eq!(roc(&[0.1, 0.2, 0.8, 0.9], &labels).unwrap().auc, 0.0);
    }

    #[test]
    fn six_point_fixture() {
        let s = [0.9, 0.8, 0.7, 0.6, 0.5, 0.4];
        let l = [true, true, false, true, false, false];
        let c = roc(&s, &l).unwrap();
        assert_relative_eq!(c.auc, 8.0 / 9.0, epsilon = 1e-12);
        assert_eq!(c.points.len(), 7);
        assert_eq!((c.points[0].fpr, c.points[0].tpr), (0.0, 0.0));
        assert_eq!((c.points[6].fpr, c.points[6].tpr), (1.0, 1.0));
    }

    #[test]
    fn single_class_is_an_error() {
        assert!(matches!(
            roc(&[0.1, 0.2], &[true, true]),
            Err(Error::SingleClass {
                positives: 2,
                negatives: 0
            })
        ));
    }

    #[test]
    fn correlation_extremes() {
        let line: Vec<(f64, f64)> = (0..5).map(|i| (i as f64, 2.0 * i as f64 + 1.0)).collect();
        assert_relative_eq!(correlation(&line).unwrap(), 1.0, epsilon = 1e-15);
        let anti: Vec<(f64, f64)> = (0..5).map(|i| (i as f64, -(i as f64))).collect();
        assert_relative_eq!(correlation(&anti).unwrap(), -1.0, epsilon = 1e-15);
        assert!(matches!(
            correlation(&[(1.0, 2.0), (1.0, 3.0)]),
            Err(Error::ZeroVariance(_))
        ));
        assert!(correlation(&[(1.0, 2.0)]).is_err());
    }

    #[test]
    fn single_point_histogram() {
        let h = density_histogram(&[(0.3, -0.2)], 4).unwrap();
        assert_eq!(h.total(), 1);
        for (e, want) in h.observed_edges.iter().zip([-0.2, 0.05, 0.3, 0.55, 0.8]) {
            assert_relative_eq!(*e, want, epsilon = 1e-15);
        }
        assert_eq!(h.counts.iter().flatten().filter(|&&c| c == 1).count(), 1);
    }

    #[test]
    fn diagonal_histogram() {
        let pairs: Vec<(f64, f64)> = (0..100).map(|i| (i as f64, i as f64)).collect();
        let h = density_histogram(&pairs, 5).unwrap();
        for (i, row) in h.counts.iter().enumerate() {
            for (j, &c) in row.iter().enumerate() {
                assert_eq!(c > 0, i == j);
            }
        }
        assert_eq!(h.counts[4][4], 20);
    }

    #[test]
    fn grids_must_be_monotone() {
        assert!(check_grid(&[0.1, 0.2, 0.2]).is_err());
        assert!(check_grid(&[]).is_err());
        assert!(check_grid(&[1.0, 0.5]).is_ok());
    }
}
