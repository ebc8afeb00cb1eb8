//! Subspace scoring: ratio information criteria, training error and
//! leave-one-out error, plus the argmin over candidate subspaces.
//!
//! Every criterion is "smaller is better". Subspaces the criterion cannot
//! evaluate (singular covariance, failed Gamma fit, ...) score `+∞` so an
//! ensemble fit never aborts halfway.
//!
//! The free functions work on a dataset already restricted to the subspace.
//! [`SubspaceScorer`] is the fast path used during ensemble fitting: it
//! computes full-width sufficient statistics once and scores a subspace from
//! their sub-blocks.

use alloc::vec::Vec;

use crate::base::{self, gamma_fit_column, BaseClassifierKind, GammaParams, LearnerParams, TrainedLearner};
use crate::dataset::{ClassSplit, LabeledDataset, Subspace};
use crate::error::{Error, Result};
use crate::gaussian::{CovarianceModel, GaussianSummary};
use crate::linalg::CholeskyFactor;
use crate::neighbors::{kth_between_columns, kth_within_columns, loo_knn_counts_with, PointColumns, RowTally};
use crate::special::{digamma_unchecked, log_gamma};

/// Distances below this are clamped before taking logarithms.
pub const MIN_NN_DISTANCE: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum CriterionKind {
    /// Closed-form RIC of the base classifier's parametric model.
    RicParametric,
    /// RIC with nearest-neighbor KL estimates; `None` means `⌊√n_r⌋`.
    RicNonparametric { k0: Option<usize>, k1: Option<usize> },
    TrainingError,
    LooCv,
}

impl CriterionKind {
    pub fn name(&self) -> &'static str {
        match self {
            Self::RicParametric => "ric",
            Self::RicNonparametric { .. } => "ric-np",
            Self::TrainingError => "train-err",
            Self::LooCv => "loo",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CriterionConfig {
    pub kind: CriterionKind,
    /// Penalty scale; `None` means `ln(n)/n`.
    pub c_n: Option<f64>,
}

impl CriterionConfig {
    pub fn new(kind: CriterionKind) -> Self {
        Self { kind, c_n: None }
    }

    /// RIC for parametric bases, leave-one-out error for k-NN.
    pub fn default_for(base: &BaseClassifierKind) -> Self {
        match base {
            BaseClassifierKind::Knn { .. } => Self::new(CriterionKind::LooCv),
            _ => Self::new(CriterionKind::RicParametric),
        }
    }

    pub fn resolved_c_n(&self, n: usize) -> f64 {
        self.c_n.unwrap_or_else(|| default_c_n(n))
    }

    pub fn validate(&self) -> Result<()> {
        if let Some(c) = self.c_n {
            if !(c >= 0.0) || !c.is_finite() {
                return Err(Error::InvalidConfig("c_n must be a finite non-negative number".into()));
            }
        }
        if let CriterionKind::RicNonparametric { k0, k1 } = self.kind {
            if k0 == Some(0) || k1 == Some(0) {
                return Err(Error::InvalidConfig("k0 and k1 must be at least 1".into()));
            }
        }
        Ok(())
    }
}

/// `ln(n) / n`.
pub fn default_c_n(n: usize) -> f64 {
    libm::log(n as f64) / n as f64
}

/// deg(S) of the LDA model.
pub fn deg_lda(d: usize) -> f64 {
    (d + 1) as f64
}

/// deg(S) of the QDA model.
pub fn deg_qda(d: usize) -> f64 {
    (d * (d + 3) / 2 + 1) as f64
}

/// deg(S) of the independent-Gamma model.
pub fn deg_gamma(d: usize) -> f64 {
    (2 * d + 1) as f64
}

/// RIC from a pooled-covariance summary:
/// `−δᵀ Σ̂⁻¹ δ + c_n (|S| + 1)`.
pub fn ric_lda_from_summary(summary: &GaussianSummary, c_n: f64) -> f64 {
    let CovarianceModel::Pooled(cov) = &summary.covariance else {
        return f64::INFINITY;
    };
    let Some(chol) = CholeskyFactor::try_factor(cov) else {
        return f64::INFINITY;
    };
    let mahalanobis = chol.inverse_quad_form(&summary.mean_difference(), &mut Vec::new());
    -mahalanobis + c_n * deg_lda(summary.dim())
}

/// RIC from a per-class summary: the linear, trace and log-determinant
/// divergence terms plus `c_n (|S|(|S|+3)/2 + 1)`.
pub fn ric_qda_from_summary(summary: &GaussianSummary, c_n: f64) -> f64 {
    let CovarianceModel::PerClass { cov0, cov1 } = &summary.covariance else {
        return f64::INFINITY;
    };
    let (Some(l0), Some(l1)) = (CholeskyFactor::try_factor(cov0), CholeskyFactor::try_factor(cov1)) else {
        return f64::INFINITY;
    };
    let d = summary.dim();
    let (pi0, pi1) = (summary.pi0_hat, summary.pi1_hat);
    let delta = summary.mean_difference();
    let mut scratch = Vec::with_capacity(d);
    let linear = pi1 * l0.inverse_quad_form(&delta, &mut scratch) + pi0 * l1.inverse_quad_form(&delta, &mut scratch);
    // Tr[(A1 − A0)(π1 Σ1 − π0 Σ0)] = d − π0 Tr(Σ1⁻¹ Σ0) − π1 Tr(Σ0⁻¹ Σ1)
    let trace = d as f64 - pi0 * trace_inv_product(&l1, cov0) - pi1 * trace_inv_product(&l0, cov1);
    let logdet = (pi1 - pi0) * (l1.log_det() - l0.log_det());
    -linear + trace + logdet + c_n * deg_qda(d)
}

/// `Tr(A⁻¹ B)` for the Cholesky factor of `A` and symmetric `B`.
fn trace_inv_product(chol_a: &CholeskyFactor, b: &crate::linalg::Matrix) -> f64 {
    let d = chol_a.dim();
    let mut col = Vec::with_capacity(d);
    let mut total = 0.0;
    for j in 0..d {
        col.clear();
        col.extend((0..d).map(|i| b[(i, j)]));
        chol_a.forward_in_place(&mut col);
        chol_a.backward_in_place(&mut col);
        total += col[j];
    }
    total
}

/// Ratio information criterion of the LDA model on a restricted dataset.
pub fn ric_lda(restricted: &LabeledDataset, split: &ClassSplit, c_n: f64) -> f64 {
    match GaussianSummary::pooled(restricted, split) {
        Ok(s) => ric_lda_from_summary(&s, c_n),
        Err(_) => f64::INFINITY,
    }
}

/// Ratio information criterion of the QDA model on a restricted dataset.
pub fn ric_qda(restricted: &LabeledDataset, split: &ClassSplit, c_n: f64) -> f64 {
    if split.n0 < 2 || split.n1 < 2 {
        return f64::INFINITY;
    }
    match GaussianSummary::per_class(restricted, split) {
        Ok(s) => ric_qda_from_summary(&s, c_n),
        Err(_) => f64::INFINITY,
    }
}

/// KL(Ga(a, b) ‖ Ga(a′, b′)) for shape `a` and scale `b`.
pub fn gamma_kl(p: GammaParams, q: GammaParams) -> f64 {
    let (a, b, a2, b2) = (p.shape, p.scale, q.shape, q.scale);
    let lg = |x: f64| log_gamma(x).unwrap_or(f64::NAN);
    (a - a2) * digamma_unchecked(a) - lg(a) + lg(a2) + a2 * libm::log(b2 / b) + a * (b - b2) / b2
}

/// `(Σ_j KL(f₀ⱼ‖f₁ⱼ), Σ_j KL(f₁ⱼ‖f₀ⱼ))` summed in the given order.
fn gamma_kl_sums<'a>(pairs: impl Iterator<Item = (&'a GammaParams, &'a GammaParams)>) -> (f64, f64) {
    let mut kl01 = 0.0;
    let mut kl10 = 0.0;
    for (g0, g1) in pairs {
        kl01 += gamma_kl(*g0, *g1);
        kl10 += gamma_kl(*g1, *g0);
    }
    (kl01, kl10)
}

fn ric_from_kl(pi0: f64, pi1: f64, kl01: f64, kl10: f64, penalty: f64) -> f64 {
    let v = -2.0 * (pi0 * kl01 + pi1 * kl10) + penalty;
    if v.is_nan() {
        f64::INFINITY
    } else {
        v
    }
}

/// RIC of the independent-Gamma model, with closed-form KL between the
/// fitted marginals and `deg(S) = 2|S| + 1`.
pub fn ric_gamma(restricted: &LabeledDataset, split: &ClassSplit, c_n: f64) -> f64 {
    let mut scratch = Vec::new();
    let mut params = Vec::with_capacity(restricted.p());
    for j in 0..restricted.p() {
        let g0 = gamma_fit_column(restricted, &split.indices0, j, &mut scratch);
        let g1 = gamma_fit_column(restricted, &split.indices1, j, &mut scratch);
        match (g0, g1) {
            (Ok(a), Ok(b)) => params.push((a, b)),
            _ => return f64::INFINITY,
        }
    }
    let (kl01, kl10) = gamma_kl_sums(params.iter().map(|(a, b)| (a, b)));
    ric_from_kl(split.pi0_hat, split.pi1_hat, kl01, kl10, c_n * deg_gamma(restricted.p()))
}

/// Nearest-neighbor estimate of KL(f ‖ g) from a sample `x` of `f` and a
/// sample `y` of `g`, using the `k_within`-th neighbor inside `x` and the
/// `k_cross`-th neighbor in `y`:
///
/// `(d/n) Σᵢ ln(ρ_cross(xᵢ)/ρ_within(xᵢ)) + ln(m/(n−1)) + Ψ(k_within) − Ψ(k_cross)`.
pub fn kl_nonparametric(x: &PointColumns, y: &PointColumns, k_within: usize, k_cross: usize) -> Result<f64> {
    let (n, m) = (x.len(), y.len());
    if k_within == 0 || k_within + 1 > n {
        return Err(Error::KTooLarge { k: k_within, max: n.saturating_sub(1) });
    }
    if k_cross == 0 || k_cross > m {
        return Err(Error::KTooLarge { k: k_cross, max: m });
    }
    if x.dim() != y.dim() {
        return Err(Error::DimensionMismatch { expected: x.dim(), got: y.dim() });
    }
    let within = kth_within_columns(x, k_within);
    let cross = kth_between_columns(x, y, k_cross);
    let log_sum: f64 = within
        .iter()
        .zip(&cross)
        .map(|(w, c)| libm::log(c.max(MIN_NN_DISTANCE) / w.max(MIN_NN_DISTANCE)))
        .sum();
    Ok(x.dim() as f64 / n as f64 * log_sum + libm::log(m as f64 / (n - 1) as f64) + digamma_unchecked(k_within as f64)
        - digamma_unchecked(k_cross as f64))
}

/// Default neighbor orders `(⌊√n₀⌋, ⌊√n₁⌋)`.
pub fn default_nn_orders(split: &ClassSplit) -> (usize, usize) {
    let isqrt = |v: usize| (libm::sqrt(v as f64) as usize).max(1);
    (isqrt(split.n0), isqrt(split.n1))
}

/// Nonparametric RIC: `−2[π̂₀ KL̂₀₁ + π̂₁ KL̂₁₀] + c_n · deg`.
///
/// `k0` is the neighbor order inside class 0 and `k1` inside class 1; each is
/// also the cross-sample order when estimating the other direction.
pub fn ric_nonparametric(
    restricted: &LabeledDataset,
    split: &ClassSplit,
    c_n: f64,
    k0: usize,
    k1: usize,
    deg: f64,
) -> Result<f64> {
    let full = Subspace::full(restricted.p());
    let x0 = PointColumns::from_dataset(restricted, &full, Some(&split.indices0));
    let x1 = PointColumns::from_dataset(restricted, &full, Some(&split.indices1));
    let kl01 = kl_nonparametric(&x0, &x1, k0, k1)?;
    let kl10 = kl_nonparametric(&x1, &x0, k1, k0)?;
    Ok(ric_from_kl(split.pi0_hat, split.pi1_hat, kl01, kl10, c_n * deg))
}

/// In-sample misclassification rate of `kind` fitted on `restricted`.
pub fn training_error(restricted: &LabeledDataset, split: &ClassSplit, kind: &BaseClassifierKind) -> f64 {
    match base::fit(kind, restricted, split) {
        Ok(l) => base::count_errors(&l, restricted) as f64 / restricted.n() as f64,
        Err(_) => f64::INFINITY,
    }
}

/// Leave-one-out misclassification rate of `kind` on `restricted`.
///
/// k-NN uses neighbor exclusion and the best `k` of the grid; other bases
/// refit once per held-out row.
pub fn loo_cv_error(restricted: &LabeledDataset, split: &ClassSplit, kind: &BaseClassifierKind) -> f64 {
    let n = restricted.n();
    let counted = match kind {
        BaseClassifierKind::Knn { k_grid } => {
            let cols = PointColumns::from_dataset(restricted, &Subspace::full(restricted.p()), None);
            loo_knn_best(&cols, restricted.labels(), k_grid, split.n1 > split.n0, None, None)
        }
        _ => loo_refit_errors(restricted, kind, &Subspace::full(restricted.p()), None),
    };
    counted.map_or(f64::INFINITY, |c| c as f64 / n as f64)
}

fn loo_knn_best(
    cols: &PointColumns,
    labels: &[u8],
    k_grid: &[usize],
    ones_preferred: bool,
    cutoff: Option<usize>,
    tally: Option<&mut RowTally>,
) -> Option<usize> {
    let grid = base::usable_grid(k_grid, cols.len()).ok()?;
    let out = loo_knn_counts_with(cols, labels, &grid, ones_preferred, cutoff, tally).ok()?;
    Some(out.best().1)
}

/// Held-out misclassification count with one refit per row; stops once the
/// count exceeds `cutoff`. `None` when some refit fails.
fn loo_refit_errors(data: &LabeledDataset, kind: &BaseClassifierKind, s: &Subspace, cutoff: Option<usize>) -> Option<usize> {
    let n = data.n();
    let restricted = data.restrict(s).ok()?;
    let mut rows: Vec<usize> = (1..n).collect();
    let mut errors = 0;
    let mut x = Vec::new();
    for i in 0..n {
        if i > 0 {
            rows[i - 1] = i - 1;
        }
        let train = restricted.select_rows(&rows);
        let split = train.class_split().ok()?;
        let learner = base::fit(kind, &train, &split).ok()?;
        x.clear();
        x.extend_from_slice(restricted.row(i));
        if learner.predict(&x).ok()? != restricted.label(i) {
            errors += 1;
            if cutoff.is_some_and(|c| errors > c) {
                return Some(errors);
            }
        }
    }
    Some(errors)
}

/// True when `(score, s)` should replace `(best_score, best)`: lower score,
/// or equal score and `s` precedes `best` in (size, lexicographic) order.
/// NaN counts as `+∞`.
pub fn beats(score: f64, s: &Subspace, best_score: f64, best: &Subspace) -> bool {
    let a = if score.is_nan() { f64::INFINITY } else { score };
    let b = if best_score.is_nan() { f64::INFINITY } else { best_score };
    a < b || (a == b && s < best)
}

/// Index of the winning candidate under [`beats`].
pub fn argmin_candidate(candidates: &[Subspace], scores: &[f64]) -> Option<usize> {
    let mut best: Option<usize> = None;
    for (i, (s, &v)) in candidates.iter().zip(scores).enumerate() {
        match best {
            Some(b) if !beats(v, s, scores[b], &candidates[b]) => {}
            _ => best = Some(i),
        }
    }
    best
}

/// Scores every candidate on `data` and returns the minimizer with its score.
/// If all scores are `+∞` the smallest candidate wins.
pub fn select_optimal(
    data: &LabeledDataset,
    split: &ClassSplit,
    candidates: &[Subspace],
    base: &BaseClassifierKind,
    criterion: &CriterionConfig,
) -> Result<(Subspace, f64)> {
    if candidates.is_empty() {
        return Err(Error::InvalidConfig("no candidate subspaces".into()));
    }
    let scorer = SubspaceScorer::new(data, split, base, criterion)?;
    let scores: Vec<f64> = candidates.iter().map(|s| scorer.score(s, None)).collect();
    let i = argmin_candidate(candidates, &scores).expect("nonempty");
    Ok((candidates[i].clone(), scores[i]))
}

/// Per-learner scratch for [`SubspaceScorer::score_with`].
#[derive(Debug, Clone)]
pub struct ScoreState {
    tally: Option<RowTally>,
}

enum Cache {
    None,
    Gaussian { lda: GaussianSummary, qda: Option<GaussianSummary> },
    Gamma { params: Vec<Option<(GammaParams, GammaParams)>> },
}

/// Scores subspaces of one training set under a fixed base and criterion.
pub struct SubspaceScorer<'a> {
    data: &'a LabeledDataset,
    split: &'a ClassSplit,
    base: BaseClassifierKind,
    kind: CriterionKind,
    c_n: f64,
    nn_orders: (usize, usize),
    cache: Cache,
}

impl<'a> SubspaceScorer<'a> {
    pub fn new(
        data: &'a LabeledDataset,
        split: &'a ClassSplit,
        base: &BaseClassifierKind,
        criterion: &CriterionConfig,
    ) -> Result<Self> {
        base.validate()?;
        criterion.validate()?;
        let c_n = criterion.resolved_c_n(data.n());
        let defaults = default_nn_orders(split);
        let nn_orders = match criterion.kind {
            CriterionKind::RicNonparametric { k0, k1 } => (k0.unwrap_or(defaults.0), k1.unwrap_or(defaults.1)),
            _ => defaults,
        };
        let cache = match base {
            BaseClassifierKind::Lda | BaseClassifierKind::Qda => {
                let (lda, qda) = GaussianSummary::both(data, split)?;
                let qda = (split.n0 >= 2 && split.n1 >= 2).then_some(qda);
                Cache::Gaussian { lda, qda }
            }
            BaseClassifierKind::Gamma => {
                let mut scratch = Vec::new();
                let params = (0..data.p())
                    .map(|j| {
                        let g0 = gamma_fit_column(data, &split.indices0, j, &mut scratch).ok()?;
                        let g1 = gamma_fit_column(data, &split.indices1, j, &mut scratch).ok()?;
                        Some((g0, g1))
                    })
                    .collect();
                Cache::Gamma { params }
            }
            BaseClassifierKind::Knn { .. } => Cache::None,
        };
        Ok(Self { data, split, base: base.clone(), kind: criterion.kind.clone(), c_n, nn_orders, cache })
    }

    pub fn c_n(&self) -> f64 {
        self.c_n
    }

    pub fn criterion(&self) -> &CriterionKind {
        &self.kind
    }

    /// Scratch for [`score_with`](Self::score_with), meant to live for the
    /// candidates of one learner.
    pub fn new_state(&self) -> ScoreState {
        let tally = (matches!(self.kind, CriterionKind::LooCv) && matches!(self.base, BaseClassifierKind::Knn { .. }))
            .then(|| RowTally::new(self.data.n()));
        ScoreState { tally }
    }

    /// Criterion value of `s`. For counting criteria, evaluation may stop
    /// early once the value is certain to exceed `bound`; the returned value
    /// is then a lower bound that is still greater than `bound`.
    pub fn score(&self, s: &Subspace, bound: Option<f64>) -> f64 {
        self.score_with(s, bound, &mut ScoreState { tally: None })
    }

    /// [`score`](Self::score) with reusable state. The state only affects
    /// how fast a hopeless candidate is rejected, never a complete value.
    pub fn score_with(&self, s: &Subspace, bound: Option<f64>, state: &mut ScoreState) -> f64 {
        let n = self.data.n();
        let cutoff = bound.filter(|b| b.is_finite()).map(|b| libm::floor(b * n as f64 + 1e-9) as usize);
        match (&self.kind, &self.base) {
            (CriterionKind::RicParametric, BaseClassifierKind::Lda) => match &self.cache {
                Cache::Gaussian { lda, .. } => ric_lda_from_summary(&lda.restrict(s), self.c_n),
                _ => unreachable!("LDA scorer keeps Gaussian statistics"),
            },
            (CriterionKind::RicParametric, BaseClassifierKind::Qda) => match &self.cache {
                Cache::Gaussian { qda: Some(qda), .. } => ric_qda_from_summary(&qda.restrict(s), self.c_n),
                _ => f64::INFINITY,
            },
            (CriterionKind::RicParametric, BaseClassifierKind::Gamma) => match &self.cache {
                Cache::Gamma { params } => {
                    let mut chosen = Vec::with_capacity(s.len());
                    for &j in s.indices() {
                        match &params[j] {
                            Some(pair) => chosen.push(pair),
                            None => return f64::INFINITY,
                        }
                    }
                    let (kl01, kl10) = gamma_kl_sums(chosen.iter().map(|(a, b)| (a, b)));
                    ric_from_kl(self.split.pi0_hat, self.split.pi1_hat, kl01, kl10, self.c_n * deg_gamma(s.len()))
                }
                _ => unreachable!("Gamma scorer keeps per-feature fits"),
            },
            (CriterionKind::RicParametric, BaseClassifierKind::Knn { .. }) => {
                // k-NN has no parametric model; the LDA form stands in
                match self.data.restrict(s) {
                    Ok(r) => ric_lda(&r, self.split, self.c_n),
                    Err(_) => f64::INFINITY,
                }
            }
            (CriterionKind::RicNonparametric { .. }, _) => {
                let (k0, k1) = self.nn_orders;
                self.data
                    .restrict(s)
                    .and_then(|r| ric_nonparametric(&r, self.split, self.c_n, k0, k1, deg_lda(s.len())))
                    .unwrap_or(f64::INFINITY)
            }
            (CriterionKind::TrainingError, _) => match self.fit_learner(s) {
                Ok(l) => base::count_errors(&l, self.data) as f64 / n as f64,
                Err(_) => f64::INFINITY,
            },
            (CriterionKind::LooCv, BaseClassifierKind::Knn { k_grid }) => {
                let cols = PointColumns::from_dataset(self.data, s, None);
                loo_knn_best(&cols, self.data.labels(), k_grid, self.split.n1 > self.split.n0, cutoff, state.tally.as_mut())
                    .map_or(f64::INFINITY, |c| c as f64 / n as f64)
            }
            (CriterionKind::LooCv, base) => {
                loo_refit_errors(self.data, base, s, cutoff).map_or(f64::INFINITY, |c| c as f64 / n as f64)
            }
        }
    }

    /// Fits the base classifier on `s`, reusing cached statistics.
    pub fn fit_learner(&self, s: &Subspace) -> Result<TrainedLearner> {
        s.check_against(self.data.p())?;
        let params = match (&self.base, &self.cache) {
            (BaseClassifierKind::Lda, Cache::Gaussian { lda, .. }) => base::lda_from_summary(&lda.restrict(s))?,
            (BaseClassifierKind::Qda, Cache::Gaussian { qda, .. }) => match qda {
                Some(q) => base::qda_from_summary(&q.restrict(s))?,
                None => return Err(Error::FitFailure { reason: "QDA needs at least two rows per class".into() }),
            },
            (BaseClassifierKind::Gamma, Cache::Gamma { params }) => {
                let mut class0 = Vec::with_capacity(s.len());
                let mut class1 = Vec::with_capacity(s.len());
                for &j in s.indices() {
                    let Some((g0, g1)) = params[j] else {
                        return Err(Error::FitFailure { reason: alloc::format!("Gamma fit of feature {j} failed") });
                    };
                    class0.push(g0);
                    class1.push(g1);
                }
                LearnerParams::Gamma { class0, class1, log_prior_ratio: self.split.log_prior_ratio() }
            }
            (base, _) => return base::fit_on(base, self.data, self.split, s),
        };
        Ok(TrainedLearner { subspace: s.clone(), params })
    }
}
