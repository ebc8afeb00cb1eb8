//! The subspace ensemble: fitting, iteration, thresholding and prediction.

use alloc::vec::Vec;

use crate::base::{BaseClassifierKind, TrainedLearner};
use crate::criteria::{beats, CriterionConfig, SubspaceScorer};
use crate::dataset::{LabeledDataset, Subspace};
use crate::error::{Error, Result};
use crate::sampling::{substream, update_weights, SubspaceDistribution};

pub const DEFAULT_B1: usize = 200;
pub const DEFAULT_B2: usize = 500;
pub const DEFAULT_C0: f64 = 0.1;

/// Threshold candidates within this distance of 0.5 count as equally close.
const THRESHOLD_TIE_TOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub struct EnsembleConfig {
    /// Number of weak learners.
    pub b1: usize,
    /// Candidate subspaces drawn per learner.
    pub b2: usize,
    /// Maximum subspace size; `None` picks the default from the data.
    pub d_max: Option<usize>,
    pub base: BaseClassifierKind,
    pub criterion: CriterionConfig,
    /// Reweighting rounds after the initial uniform round.
    pub iterations: usize,
    pub c0: f64,
    pub seed: u64,
    /// Worker threads for fitting (only used with the `std` feature).
    pub threads: usize,
}

impl EnsembleConfig {
    pub fn new(base: BaseClassifierKind) -> Self {
        let criterion = CriterionConfig::default_for(&base);
        Self {
            b1: DEFAULT_B1,
            b2: DEFAULT_B2,
            d_max: None,
            base,
            criterion,
            iterations: 0,
            c0: DEFAULT_C0,
            seed: 0,
            threads: 1,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.b1 == 0 || self.b2 == 0 {
            return Err(Error::InvalidConfig("B1 and B2 must be positive".into()));
        }
        if self.d_max == Some(0) {
            return Err(Error::InvalidConfig("D must be positive".into()));
        }
        if !(self.c0 > 0.0 && self.c0.is_finite()) {
            return Err(Error::InvalidConfig("C0 must be a positive number".into()));
        }
        if self.threads == 0 {
            return Err(Error::InvalidConfig("threads must be positive".into()));
        }
        self.base.validate()?;
        self.criterion.validate()
    }

    /// `D` for a training set: the override capped at `p`, else
    /// `min(p, ⌊√n⌋)`, or `min(p, ⌊√n₀⌋, ⌊√n₁⌋)` for QDA.
    pub fn resolved_d(&self, n: usize, n0: usize, n1: usize, p: usize) -> usize {
        let isqrt = |v: usize| libm::sqrt(v as f64) as usize;
        let d = match (self.d_max, &self.base) {
            (Some(d), _) => d,
            (None, BaseClassifierKind::Qda) => isqrt(n0).min(isqrt(n1)),
            (None, _) => isqrt(n),
        };
        d.min(p).max(1)
    }
}

/// A fitted ensemble.
#[derive(Debug, Clone, PartialEq)]
pub struct RaseModel {
    config: EnsembleConfig,
    p: usize,
    d_max: usize,
    learners: Vec<TrainedLearner>,
    alpha_hat: f64,
    eta: Vec<f64>,
    training: Option<LabeledDataset>,
}

impl RaseModel {
    /// Reassembles a model, e.g. after deserialization. `eta` is recomputed
    /// from the learners and must match the supplied one.
    pub fn from_parts(
        config: EnsembleConfig,
        p: usize,
        d_max: usize,
        learners: Vec<TrainedLearner>,
        alpha_hat: f64,
        training: Option<LabeledDataset>,
    ) -> Result<Self> {
        if learners.is_empty() {
            return Err(Error::InvalidConfig("model has no learners".into()));
        }
        if !(0.0..=1.0).contains(&alpha_hat) {
            return Err(Error::InvalidConfig("alpha_hat outside [0, 1]".into()));
        }
        for l in &learners {
            l.subspace.check_against(p)?;
        }
        let eta = selection_frequencies(&learners, p);
        Ok(Self { config, p, d_max, learners, alpha_hat, eta, training })
    }

    pub fn config(&self) -> &EnsembleConfig {
        &self.config
    }

    pub fn p(&self) -> usize {
        self.p
    }

    /// The subspace size bound used during fitting.
    pub fn d_max(&self) -> usize {
        self.d_max
    }

    pub fn learners(&self) -> &[TrainedLearner] {
        &self.learners
    }

    pub fn alpha_hat(&self) -> f64 {
        self.alpha_hat
    }

    /// Fraction of learners whose subspace contains each feature.
    pub fn eta(&self) -> &[f64] {
        &self.eta
    }

    /// Training data, kept for k-NN models only.
    pub fn training_data(&self) -> Option<&LabeledDataset> {
        self.training.as_ref()
    }

    /// Fraction of learners voting class 1 at `x`.
    pub fn predict_score(&self, x: &[f64]) -> Result<f64> {
        if x.len() != self.p {
            return Err(Error::DimensionMismatch { expected: self.p, got: x.len() });
        }
        let ones = self.learners.iter().filter(|l| l.predict_row(x) == 1).count();
        Ok(ones as f64 / self.learners.len() as f64)
    }

    /// 1 iff the vote fraction strictly exceeds `alpha_hat`.
    pub fn predict(&self, x: &[f64]) -> Result<u8> {
        Ok((self.predict_score(x)? > self.alpha_hat) as u8)
    }

    pub fn predict_scores(&self, data: &LabeledDataset) -> Result<Vec<f64>> {
        if data.p() != self.p {
            return Err(Error::DimensionMismatch { expected: self.p, got: data.p() });
        }
        Ok(vote_fractions(&self.learners, data))
    }

    pub fn predict_dataset(&self, data: &LabeledDataset) -> Result<Vec<u8>> {
        Ok(self.predict_scores(data)?.into_iter().map(|v| (v > self.alpha_hat) as u8).collect())
    }

    pub fn misclassification_rate(&self, test: &LabeledDataset) -> Result<f64> {
        let pred = self.predict_dataset(test)?;
        let wrong = pred.iter().zip(test.labels()).filter(|(a, b)| a != b).count();
        Ok(wrong as f64 / test.n() as f64)
    }

    /// Features (0-based) by decreasing selection frequency; ties keep index order.
    pub fn feature_ranking(&self) -> Vec<(usize, f64)> {
        feature_ranking(&self.eta)
    }
}

/// `(index, η)` pairs sorted by decreasing η, ties by increasing index.
pub fn feature_ranking(eta: &[f64]) -> Vec<(usize, f64)> {
    let mut ranked: Vec<(usize, f64)> = eta.iter().copied().enumerate().collect();
    ranked.sort_by(|a, b| b.1.total_cmp(&a.1));
    ranked
}

fn selection_frequencies(learners: &[TrainedLearner], p: usize) -> Vec<f64> {
    let mut counts = alloc::vec![0usize; p];
    for l in learners {
        for &j in l.subspace.indices() {
            counts[j] += 1;
        }
    }
    counts.into_iter().map(|c| c as f64 / learners.len() as f64).collect()
}

fn vote_fractions(learners: &[TrainedLearner], data: &LabeledDataset) -> Vec<f64> {
    let mut ones = alloc::vec![0usize; data.n()];
    for l in learners {
        for (acc, v) in ones.iter_mut().zip(l.predict_dataset(data)) {
            *acc += v as usize;
        }
    }
    ones.into_iter().map(|c| c as f64 / learners.len() as f64).collect()
}

/// Empirical-error-minimizing vote threshold.
///
/// Candidates are 0, 1, 0.5 and the midpoints between consecutive distinct
/// sorted vote fractions. Among candidates with the fewest training errors
/// (`ν > α` on class 0 or `ν ≤ α` on class 1) the one closest to 0.5 wins,
/// then the smaller one.
pub fn select_threshold(nu: &[f64], labels: &[u8]) -> f64 {
    let mut sorted: Vec<f64> = nu.to_vec();
    sorted.sort_by(f64::total_cmp);
    sorted.dedup();
    let mut candidates = alloc::vec![0.0, 0.5, 1.0];
    candidates.extend(sorted.windows(2).map(|w| 0.5 * (w[0] + w[1])));

    let errors_at = |alpha: f64| {
        nu.iter()
            .zip(labels)
            .filter(|&(&v, &y)| if y == 1 { v <= alpha } else { v > alpha })
            .count()
    };
    let mut best = (usize::MAX, f64::INFINITY, 0.0);
    for alpha in candidates {
        let errors = errors_at(alpha);
        let dist = libm::fabs(alpha - 0.5);
        let better = errors < best.0
            || (errors == best.0
                && (dist < best.1 - THRESHOLD_TIE_TOL || (libm::fabs(dist - best.1) <= THRESHOLD_TIE_TOL && alpha < best.2)));
        if better {
            best = (errors, dist, alpha);
        }
    }
    best.2
}

/// Fits the ensemble with `config.iterations` reweighting rounds.
pub fn fit(data: &LabeledDataset, config: &EnsembleConfig) -> Result<RaseModel> {
    let mut path = run(data, config, false)?;
    Ok(path.pop().expect("at least one round"))
}

/// Same as [`fit`]; kept as a separate entry point for callers that want to
/// be explicit about running the reweighting loop.
pub fn fit_iterative(data: &LabeledDataset, config: &EnsembleConfig) -> Result<RaseModel> {
    fit(data, config)
}

/// Models after each round `t = 0..=config.iterations`. Entry `t` equals
/// `fit` with `iterations = t`.
pub fn fit_path(data: &LabeledDataset, config: &EnsembleConfig) -> Result<Vec<RaseModel>> {
    run(data, config, true)
}

fn run(data: &LabeledDataset, config: &EnsembleConfig, keep_path: bool) -> Result<Vec<RaseModel>> {
    config.validate()?;
    let split = data.class_split()?;
    let p = data.p();
    let d_max = config.resolved_d(data.n(), split.n0, split.n1, p);
    let scorer = SubspaceScorer::new(data, &split, &config.base, &config.criterion)?;
    let training = matches!(config.base, BaseClassifierKind::Knn { .. }).then(|| data.clone());

    let mut dist = SubspaceDistribution::uniform(p, d_max)?;
    let mut path = Vec::new();
    for t in 0..=config.iterations {
        let learners = fit_learners(&scorer, &dist, config, t as u64, p)?;
        let eta = selection_frequencies(&learners, p);
        let last = t == config.iterations;
        if keep_path || last {
            let nu = vote_fractions(&learners, data);
            let alpha_hat = select_threshold(&nu, data.labels());
            path.push(RaseModel {
                config: EnsembleConfig { iterations: t, ..config.clone() },
                p,
                d_max,
                learners,
                alpha_hat,
                eta: eta.clone(),
                training: training.clone(),
            });
        }
        if !last {
            dist = SubspaceDistribution::weighted(update_weights(&eta, config.c0), d_max)?;
        }
    }
    Ok(path)
}

fn fit_learners(
    scorer: &SubspaceScorer<'_>,
    dist: &SubspaceDistribution,
    config: &EnsembleConfig,
    t: u64,
    p: usize,
) -> Result<Vec<TrainedLearner>> {
    let one = |j: usize| fit_one_learner(scorer, dist, config, t, j as u64, p);
    #[cfg(feature = "std")]
    if config.threads > 1 {
        use rayon::prelude::*;
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(config.threads)
            .build()
            .map_err(|e| Error::InvalidConfig(alloc::format!("thread pool: {e}")))?;
        return pool.install(|| (0..config.b1).into_par_iter().map(one).collect());
    }
    (0..config.b1).map(one).collect()
}

/// Draws the learner's `B2` candidates, keeps the criterion minimizer and
/// fits the base classifier on it.
///
/// Candidates are deduplicated and scored smallest first; scoring may stop
/// early once a candidate cannot beat the incumbent. Since ties are broken by
/// the subspace order, the winner does not depend on the scoring order.
fn fit_one_learner(
    scorer: &SubspaceScorer<'_>,
    dist: &SubspaceDistribution,
    config: &EnsembleConfig,
    t: u64,
    j: u64,
    p: usize,
) -> Result<TrainedLearner> {
    let mut candidates: Vec<Subspace> =
        (0..config.b2 as u64).map(|k| dist.sample(&mut substream(config.seed, t, j, k))).collect();
    candidates.sort();
    candidates.dedup();

    let mut scored: Vec<(f64, usize)> = Vec::with_capacity(candidates.len());
    let mut best: Option<(f64, usize)> = None;
    let mut state = scorer.new_state();
    for (i, s) in candidates.iter().enumerate() {
        let bound = best.map(|(v, _)| v);
        let v = scorer.score_with(s, bound, &mut state);
        scored.push((v, i));
        match best {
            Some((bv, bi)) if !beats(v, s, bv, &candidates[bi]) => {}
            _ => best = Some((v, i)),
        }
    }
    let (_, winner) = best.expect("B2 >= 1");
    if let Ok(l) = scorer.fit_learner(&candidates[winner]) {
        return Ok(l);
    }
    // the winner could not be fitted: walk down the ranking, then singletons
    scored.sort_by(|a, b| {
        let (sa, sb) = (&candidates[a.1], &candidates[b.1]);
        if beats(a.0, sa, b.0, sb) {
            core::cmp::Ordering::Less
        } else if beats(b.0, sb, a.0, sa) {
            core::cmp::Ordering::Greater
        } else {
            core::cmp::Ordering::Equal
        }
    });
    for &(_, i) in scored.iter().skip(1) {
        if let Ok(l) = scorer.fit_learner(&candidates[i]) {
            return Ok(l);
        }
    }
    for f in 0..p {
        if let Ok(l) = scorer.fit_learner(&Subspace::singleton(f)) {
            return Ok(l);
        }
    }
    Err(Error::FitFailure { reason: alloc::format!("learner {j}: no subspace could be fitted") })
}
