//! Simulated feedback loops with known ground truth.
//!
//! True ratings come from an item response model,
//! `L[a_u + b_u·t_i + ε·η]` with `L` rounding and clamping to 1..=5. An
//! item-item collaborative filter then runs for a number of rounds: each
//! round predicts every unobserved cell from uncentered cosine similarities
//! on the current matrix, and each user independently accepts some of their
//! top predictions, which become ratings for the next round.

use std::collections::HashSet;
use std::io::Write;

use rand::seq::index;
use rand::Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;

use crate::linalg::DenseMatrix;
use crate::ratings::{Rating, RatingsMatrix};
use crate::seeds;
use crate::{Error, Result};

const STREAM_GENERATE: u64 = 0;
const STREAM_SAMPLE: u64 = 1;
const STREAM_REPAIR: u64 = 2;
const STREAM_ACCEPT: u64 = 3;

/// `(mean, standard deviation)` of the three latent factors.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IrtParams {
    pub user_bias: (f64, f64),
    pub user_sensitivity: (f64, f64),
    pub item_quality: (f64, f64),
}

impl Default for IrtParams {
    fn default() -> Self {
        Self {
            user_bias: (3.0, 1.0),
            user_sensitivity: (0.5, 0.5),
            item_quality: (0.1, 1.0),
        }
    }
}

/// Set over which acceptance weights `max(prediction, 0)^e` are normalized.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum AcceptanceScope {
    /// The user's top-r predictions of the round. The probabilities sum to 1,
    /// so about one recommendation is accepted per user and round whatever `e`.
    #[default]
    TopR,
    /// Every cell the user has a prediction for; only the top r are offered.
    /// Larger `e` concentrates mass on the top and raises the acceptance rate.
    AllCandidates,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticConfig {
    pub n_users: usize,
    pub n_items: usize,
    /// Fraction of cells kept in the true matrix.
    pub gamma: f64,
    /// Noise level of the generator.
    pub epsilon: f64,
    /// Acceptance exponent.
    pub e: f64,
    /// Recommendations offered per user and round.
    pub r: usize,
    pub iterations: usize,
    pub seed: u64,
    pub irt: IrtParams,
    pub scope: AcceptanceScope,
}

impl Default for SyntheticConfig {
    fn default() -> Self {
        Self {
            n_users: 1000,
            n_items: 100,
            gamma: 0.1,
            epsilon: 2.0,
            e: 2.0,
            r: 10,
            iterations: 10,
            seed: 0,
            irt: IrtParams::default(),
            scope: AcceptanceScope::TopR,
        }
    }
}

impl SyntheticConfig {
    pub fn validate(&self) -> Result<()> {
        let domain = |name, value: f64, domain| Err(Error::Domain { name, value, domain });
        if self.n_users == 0 || self.n_items == 0 {
            return Err(Error::InvalidArgument("n_users and n_items must be >= 1".into()));
        }
        if !(self.gamma > 0.0 && self.gamma <= 1.0) {
            return domain("gamma", self.gamma, "(0, 1]");
        }
        if !(self.epsilon >= 0.0 && self.epsilon.is_finite()) {
            return domain("epsilon", self.epsilon, ">= 0");
        }
        if !(self.e >= 0.0 && self.e.is_finite()) {
            return domain("e", self.e, ">= 0");
        }
        if self.r == 0 {
            return domain("r", 0.0, ">= 1");
        }
        if self.iterations == 0 {
            return domain("iterations", 0.0, ">= 1");
        }
        for (name, (_, sd)) in [
            ("user bias sd", self.irt.user_bias),
            ("user sensitivity sd", self.irt.user_sensitivity),
            ("item quality sd", self.irt.item_quality),
        ] {
            if !(sd >= 0.0 && sd.is_finite()) {
                return domain(name, sd, ">= 0");
            }
        }
        Ok(())
    }
}

/// Rounds to the nearest level and clamps to 1..=5.
pub fn levels(w: f64) -> f64 {
    w.round().clamp(1.0, 5.0)
}

fn normal(mean: f64, sd: f64) -> Normal<f64> {
    Normal::new(mean, sd).expect("validated standard deviation")
}

/// Dense true scores, row-major `n_users × n_items`.
pub fn true_scores(cfg: &SyntheticConfig) -> Result<Vec<f64>> {
    cfg.validate()?;
    let mut rng = seeds::stream(cfg.seed, &[STREAM_GENERATE]);
    let (m, n) = (cfg.n_users, cfg.n_items);
    let a: Vec<f64> = (0..m)
        .map(|_| normal(cfg.irt.user_bias.0, cfg.irt.user_bias.1).sample(&mut rng))
        .collect();
    let b: Vec<f64> = (0..m)
        .map(|_| normal(cfg.irt.user_sensitivity.0, cfg.irt.user_sensitivity.1).sample(&mut rng))
        .collect();
    let t: Vec<f64> = (0..n)
        .map(|_| normal(cfg.irt.item_quality.0, cfg.irt.item_quality.1).sample(&mut rng))
        .collect();
    let noise = normal(0.0, 1.0);
    let mut out = Vec::with_capacity(m * n);
    for u in 0..m {
        for ti in &t {
            let eta = cfg.epsilon * noise.sample(&mut rng);
            out.push(levels(a[u] + b[u] * ti + eta));
        }
    }
    Ok(out)
}

/// Samples `round(γ·m·n)` cells of the true scores uniformly without
/// replacement. A user or item left without ratings gets one random cell of
/// its row or column added back.
pub fn generate_true(cfg: &SyntheticConfig) -> Result<RatingsMatrix<f64>> {
    let scores = true_scores(cfg)?;
    let (m, n) = (cfg.n_users, cfg.n_items);
    let total = m * n;
    let amount = ((cfg.gamma * total as f64).round() as usize).clamp(1, total);
    let mut rng = seeds::stream(cfg.seed, &[STREAM_SAMPLE]);
    let mut cells: Vec<usize> = index::sample(&mut rng, total, amount).into_vec();
    cells.sort_unstable();

    let mut user_has = vec![false; m];
    let mut item_has = vec![false; n];
    for &c in &cells {
        user_has[c / n] = true;
        item_has[c % n] = true;
    }
    let mut rng = seeds::stream(cfg.seed, &[STREAM_REPAIR]);
    let mut extra = Vec::new();
    for (u, _) in user_has.iter().enumerate().filter(|(_, h)| !**h) {
        let i = rng.random_range(0..n);
        extra.push(u * n + i);
        item_has[i] = true;
    }
    for (i, _) in item_has.iter().enumerate().filter(|(_, h)| !**h) {
        extra.push(rng.random_range(0..m) * n + i);
    }
    cells.extend(extra);
    cells.sort_unstable();
    cells.dedup();

    let entries = cells
        .into_iter()
        .map(|c| Rating {
            user: c / n,
            item: c % n,
            value: scores[c],
        })
        .collect();
    RatingsMatrix::new(m, n, entries)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Label {
    TruePreference,
    RecommenderInduced,
}

impl Label {
    pub fn as_str(self) -> &'static str {
        match self {
            Label::TruePreference => "true_preference",
            Label::RecommenderInduced => "recommender_induced",
        }
    }

    pub fn is_induced(self) -> bool {
        self == Label::RecommenderInduced
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RoundStats {
    pub round: usize,
    /// Users with at least one prediction.
    pub users_with_candidates: usize,
    pub accepted: usize,
    pub density: f64,
}

#[derive(Debug, Clone)]
pub struct SyntheticDataset {
    pub r_true: RatingsMatrix<f64>,
    pub r_obs: RatingsMatrix<f64>,
    /// Aligned with `r_obs.entries()`.
    pub labels: Vec<Label>,
    pub rounds: Vec<RoundStats>,
}

impl SyntheticDataset {
    pub fn induced_count(&self) -> usize {
        self.labels.iter().filter(|l| l.is_induced()).count()
    }

    /// Fraction of observed cells the recommender added.
    pub fn true_effect(&self) -> f64 {
        self.induced_count() as f64 / self.labels.len() as f64
    }

    pub fn label_of(&self, user: usize, item: usize) -> Option<Label> {
        self.r_obs
            .entries()
            .binary_search_by(|r| (r.user, r.item).cmp(&(user, item)))
            .ok()
            .map(|k| self.labels[k])
    }

    /// `user_id,item_id,label`
    pub fn write_labels_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let err = |e: csv::Error| Error::io("<csv>", std::io::Error::other(e));
        w.write_record(["user_id", "item_id", "label"]).map_err(err)?;
        for (r, l) in self.r_obs.entries().iter().zip(&self.labels) {
            w.write_record([self.r_obs.user_id(r.user), self.r_obs.item_id(r.item), l.as_str()])
                .map_err(err)?;
        }
        w.flush().map_err(|e| Error::io("<csv>", e))
    }
}

/// Dense working copy of a ratings matrix for the simulation.
#[derive(Debug, Clone)]
struct State {
    m: usize,
    n: usize,
    /// Row-major values, zero where unobserved.
    values: Vec<f64>,
    observed: Vec<bool>,
}

impl State {
    fn from_ratings(r: &RatingsMatrix<f64>) -> Self {
        let (m, n) = (r.n_users(), r.n_items());
        let mut values = vec![0.0; m * n];
        let mut observed = vec![false; m * n];
        for e in r.entries() {
            values[e.user * n + e.item] = e.value;
            observed[e.user * n + e.item] = true;
        }
        Self { m, n, values, observed }
    }

    fn rated(&self, u: usize) -> impl Iterator<Item = usize> + '_ {
        (0..self.n).filter(move |&j| self.observed[u * self.n + j])
    }
}

/// Uncentered cosine similarity between item columns; items without ratings
/// (or with an all-zero column) have similarity 0 to everything.
fn cosine(state: &State) -> DenseMatrix<f64> {
    let n = state.n;
    let mut s = DenseMatrix::<f64>::zeros(n, n);
    let mut rated = Vec::with_capacity(n);
    for u in 0..state.m {
        rated.clear();
        rated.extend(state.rated(u));
        let row = &state.values[u * n..(u + 1) * n];
        for (a, &i) in rated.iter().enumerate() {
            for &j in &rated[a..] {
                s[(i, j)] += row[i] * row[j];
            }
        }
    }
    let norms: Vec<f64> = (0..n).map(|i| s[(i, i)].sqrt()).collect();
    for j in 0..n {
        for i in 0..=j {
            let d = norms[i] * norms[j];
            let v = if d > 0.0 { s[(i, j)] / d } else { 0.0 };
            s[(i, j)] = v;
            s[(j, i)] = v;
        }
    }
    s
}

/// Similarity-weighted prediction for one unobserved cell, or `None` when the
/// similarities to the user's rated items are all zero.
fn predict_cell(state: &State, sim: &DenseMatrix<f64>, u: usize, i: usize) -> Option<f64> {
    let mut num = 0.0;
    let mut den = 0.0;
    for j in state.rated(u) {
        let s = sim[(i, j)];
        num += s * state.values[u * state.n + j];
        den += s.abs();
    }
    (den > 0.0).then(|| num / den)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Prediction {
    pub user: usize,
    pub item: usize,
    pub value: f64,
}

/// One collaborative filtering step: a prediction for every unobserved cell
/// that has one, in (user, item) order.
pub fn cf_predictions(r: &RatingsMatrix<f64>) -> Vec<Prediction> {
    let state = State::from_ratings(r);
    let sim = cosine(&state);
    let mut out = Vec::new();
    for u in 0..state.m {
        for i in 0..state.n {
            if state.observed[u * state.n + i] {
                continue;
            }
            if let Some(value) = predict_cell(&state, &sim, u, i) {
                out.push(Prediction {
                    user: u,
                    item: i,
                    value,
                });
            }
        }
    }
    out
}

/// Acceptance probabilities of the offered (top-r) candidates.
fn acceptance_probabilities(
    offered: &[(usize, f64)],
    all: &[(usize, f64)],
    e: f64,
    scope: AcceptanceScope,
) -> Vec<f64> {
    let weight = |p: f64| p.max(0.0).powf(e);
    let total: f64 = match scope {
        AcceptanceScope::TopR => offered.iter().map(|c| weight(c.1)).sum(),
        AcceptanceScope::AllCandidates => all.iter().map(|c| weight(c.1)).sum(),
    };
    offered
        .iter()
        .map(|c| if total > 0.0 { weight(c.1) / total } else { 0.0 })
        .collect()
}

/// Runs the feedback loop on top of `r_true`. True cells are never modified.
pub fn run_recommender(r_true: &RatingsMatrix<f64>, cfg: &SyntheticConfig) -> Result<SyntheticDataset> {
    cfg.validate()?;
    if r_true.nnz() == 0 {
        return Err(Error::EmptyInput("true ratings matrix"));
    }
    let mut state = State::from_ratings(r_true);
    let (m, n) = (state.m, state.n);
    let mut induced: HashSet<usize> = HashSet::new();
    let mut rounds = Vec::with_capacity(cfg.iterations);

    for round in 0..cfg.iterations {
        let sim = cosine(&state);
        let decisions: Vec<(bool, Vec<(usize, f64)>)> = (0..m)
            .into_par_iter()
            .map(|u| {
                let mut cands: Vec<(usize, f64)> = (0..n)
                    .filter(|&i| !state.observed[u * n + i])
                    .filter_map(|i| predict_cell(&state, &sim, u, i).map(|p| (i, p)))
                    .collect();
                if cands.is_empty() {
                    return (false, Vec::new());
                }
                cands.sort_by(|a, b| b.1.partial_cmp(&a.1).expect("finite predictions").then(a.0.cmp(&b.0)));
                let offered = &cands[..cfg.r.min(cands.len())];
                let probs = acceptance_probabilities(offered, &cands, cfg.e, cfg.scope);
                let mut rng = seeds::stream(cfg.seed, &[STREAM_ACCEPT, round as u64, u as u64]);
                let accepted = offered
                    .iter()
                    .zip(&probs)
                    .filter(|(_, &p)| rng.random::<f64>() < p)
                    .map(|(c, _)| *c)
                    .collect();
                (true, accepted)
            })
            .collect();

        let mut accepted = 0;
        for (u, (_, acc)) in decisions.iter().enumerate() {
            for &(i, p) in acc {
                let c = u * n + i;
                state.values[c] = levels(p);
                state.observed[c] = true;
                induced.insert(c);
                accepted += 1;
            }
        }
        let nnz = state.observed.iter().filter(|&&b| b).count();
        rounds.push(RoundStats {
            round,
            users_with_candidates: decisions.iter().filter(|d| d.0).count(),
            accepted,
            density: nnz as f64 / (m * n) as f64,
        });
    }

    let mut entries = Vec::new();
    let mut labels = Vec::new();
    for c in 0..m * n {
        if state.observed[c] {
            entries.push(Rating {
                user: c / n,
                item: c % n,
                value: state.values[c],
            });
            labels.push(if induced.contains(&c) {
                Label::RecommenderInduced
            } else {
                Label::TruePreference
            });
        }
    }
    let r_obs = RatingsMatrix::with_ids(r_true.user_ids().to_vec(), r_true.item_ids().to_vec(), entries)?;
    Ok(SyntheticDataset {
        r_true: r_true.clone(),
        r_obs,
        labels,
        rounds,
    })
}

/// [`generate_true`] followed by [`run_recommender`].
pub fn simulate(cfg: &SyntheticConfig) -> Result<SyntheticDataset> {
    let r_true = generate_true(cfg)?;
    run_recommender(&r_true, cfg)
}

/// The no-feedback control: observed equals true, every label true.
pub fn without_feedback(r_true: RatingsMatrix<f64>) -> SyntheticDataset {
    let labels = vec![Label::TruePreference; r_true.nnz()];
    SyntheticDataset {
        r_obs: r_true.clone(),
        r_true,
        labels,
        rounds: Vec::new(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn level_function() {
        assert_eq!(levels(7.2), 5.0);
        assert_eq!(levels(-3.0), 1.0);
        assert_eq!(levels(3.4), 3.0);
        assert_eq!(levels(2.5), 3.0);
    }

    #[test]
    fn constant_users_without_noise() {
        let cfg = SyntheticConfig {
            n_users: 20,
            n_items: 15,
            epsilon: 0.0,
            irt: IrtParams {
                user_sensitivity: (0.0, 0.0),
                ..IrtParams::default()
            },
            ..SyntheticConfig::default()
        };
        let s = true_scores(&cfg).unwrap();
        for row in s.chunks(15) {
            assert!(row.iter().all(|&v| v == row[0]));
        }
    }

    #[test]
    fn sample_size_and_repair() {
        let cfg = SyntheticConfig {
            seed: 5,
            ..SyntheticConfig::default()
        };
        let r = generate_true(&cfg).unwrap();
        assert!(r.nnz() >= 10_000);
        assert!(r.user_counts().iter().all(|&c| c > 0));
        assert!(r.item_counts().iter().all(|&c| c > 0));
        assert!(r
            .entries()
            .iter()
            .all(|e| (1.0..=5.0).contains(&e.value) && e.value.fract() == 0.0));

        let tiny = SyntheticConfig {
            n_users: 50,
            n_items: 40,
            gamma: 0.001,
            ..SyntheticConfig::default()
        };
        let r = generate_true(&tiny).unwrap();
        assert!(r.user_counts().iter().all(|&c| c > 0));
        assert!(r.item_counts().iter().all(|&c| c > 0));
    }

    #[test]
    fn invalid_configs() {
        for cfg in [
            SyntheticConfig {
                gamma: 0.0,
                ..SyntheticConfig::default()
            },
            SyntheticConfig {
                gamma: 1.5,
                ..SyntheticConfig::default()
            },
            SyntheticConfig {
                epsilon: -1.0,
                ..SyntheticConfig::default()
            },
            SyntheticConfig {
                r: 0,
                ..SyntheticConfig::default()
            },
            SyntheticConfig {
                iterations: 0,
                ..SyntheticConfig::default()
            },
        ] {
            assert!(generate_true(&cfg).is_err());
        }
    }

    #[test]
    fn top_r_probabilities_sum_to_one() {
        let offered = [(0, 4.0), (1, 2.0)];
        let p = acceptance_probabilities(&offered, &offered, 2.0, AcceptanceScope::TopR);
        assert_eq!(p, vec![0.8, 0.2]);
        let all = [(0, 4.0), (1, 2.0), (2, 2.0)];
        let p = acceptance_probabilities(&offered, &all, 1.0, AcceptanceScope::AllCandidates);
        assert_eq!(p, vec![0.5, 0.25]);
    }

    #[test]
    fn zero_predictions_accept_nothing() {
        let offered = [(0, 0.0), (1, -1.0)];
        let p = acceptance_probabilities(&offered, &offered, 1.0, AcceptanceScope::TopR);
        assert_eq!(p, vec![0.0, 0.0]);
    }
}
