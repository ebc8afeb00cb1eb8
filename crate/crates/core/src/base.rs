//! Base classifiers: LDA, QDA, k-NN and the independent-Gamma model.
//!
//! A [`TrainedLearner`] scores points already restricted to its subspace;
//! [`TrainedLearner::predict_row`] does the gathering for full-width rows.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use crate::dataset::{ClassSplit, LabeledDataset, Subspace};
use crate::error::{Error, Result};
use crate::gaussian::{CovarianceModel, GaussianSummary};
use crate::linalg::{CholeskyFactor, Matrix};
use crate::neighbors::{knn_vote, loo_knn_counts, nearest_k, PointColumns};
use crate::special::{digamma_unchecked, trigamma_unchecked};

/// The default k-NN grid, searched by leave-one-out error.
pub const DEFAULT_K_GRID: [usize; 5] = [3, 5, 7, 9, 11];

const GAMMA_MAX_ITER: usize = 100;
const GAMMA_STEP_TOL: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum BaseClassifierKind {
    Lda,
    Qda,
    Knn { k_grid: Vec<usize> },
    Gamma,
}

impl BaseClassifierKind {
    pub fn knn() -> Self {
        Self::Knn { k_grid: DEFAULT_K_GRID.to_vec() }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Self::Lda => "lda",
            Self::Qda => "qda",
            Self::Knn { .. } => "knn",
            Self::Gamma => "gamma",
        }
    }

    pub fn validate(&self) -> Result<()> {
        if let Self::Knn { k_grid } = self {
            if k_grid.is_empty() || k_grid.contains(&0) {
                return Err(Error::InvalidConfig("k grid must be nonempty with entries >= 1".into()));
            }
        }
        Ok(())
    }
}

/// Fitted shape and scale of one Gamma marginal.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GammaParams {
    pub shape: f64,
    pub scale: f64,
}

impl GammaParams {
    /// `−a ln b − ln Γ(a)`, the part of the log-density free of `x`.
    fn log_norm(&self) -> f64 {
        -self.shape * libm::log(self.scale) - libm::lgamma(self.shape)
    }

    pub fn log_pdf(&self, x: f64) -> f64 {
        if x < 0.0 {
            return f64::NEG_INFINITY;
        }
        self.log_norm() + (self.shape - 1.0) * libm::log(x) - x / self.scale
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum LearnerParams {
    Lda {
        mean0: Vec<f64>,
        mean1: Vec<f64>,
        cov_inv: Matrix,
        log_prior_ratio: f64,
        /// Σ̂⁻¹(μ̂⁽¹⁾ − μ̂⁽⁰⁾)
        direction: Vec<f64>,
    },
    Qda {
        mean0: Vec<f64>,
        mean1: Vec<f64>,
        cov0_inv: Matrix,
        cov1_inv: Matrix,
        logdet0: f64,
        logdet1: f64,
        log_prior_ratio: f64,
    },
    Knn {
        k: usize,
        train: PointColumns,
        labels: Vec<u8>,
        /// Class 1 wins exact vote ties.
        ones_preferred: bool,
    },
    Gamma {
        class0: Vec<GammaParams>,
        class1: Vec<GammaParams>,
        log_prior_ratio: f64,
    },
}

/// One fitted base classifier bound to its subspace.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainedLearner {
    pub subspace: Subspace,
    pub params: LearnerParams,
}

fn fit_failure(reason: impl Into<String>) -> Error {
    Error::FitFailure { reason: reason.into() }
}

/// Fits `kind` on a dataset whose columns are exactly the learner's features.
/// The learner's subspace is all columns of `restricted`.
pub fn fit(kind: &BaseClassifierKind, restricted: &LabeledDataset, split: &ClassSplit) -> Result<TrainedLearner> {
    let s = Subspace::full(restricted.p());
    fit_params(kind, restricted, split).map(|params| TrainedLearner { subspace: s, params })
}

/// Fits `kind` on the columns `s` of `data`.
pub fn fit_on(kind: &BaseClassifierKind, data: &LabeledDataset, split: &ClassSplit, s: &Subspace) -> Result<TrainedLearner> {
    let restricted = data.restrict(s)?;
    fit_params(kind, &restricted, split).map(|params| TrainedLearner { subspace: s.clone(), params })
}

fn fit_params(kind: &BaseClassifierKind, restricted: &LabeledDataset, split: &ClassSplit) -> Result<LearnerParams> {
    match kind {
        BaseClassifierKind::Lda => lda_from_summary(&GaussianSummary::pooled(restricted, split)?),
        BaseClassifierKind::Qda => {
            if split.n0 < 2 || split.n1 < 2 {
                return Err(fit_failure("QDA needs at least two rows per class"));
            }
            qda_from_summary(&GaussianSummary::per_class(restricted, split)?)
        }
        BaseClassifierKind::Knn { k_grid } => knn_fit(restricted, split, k_grid),
        BaseClassifierKind::Gamma => {
            let mut class0 = Vec::with_capacity(restricted.p());
            let mut class1 = Vec::with_capacity(restricted.p());
            let mut column = Vec::new();
            for j in 0..restricted.p() {
                class0.push(gamma_fit_column(restricted, &split.indices0, j, &mut column)?);
                class1.push(gamma_fit_column(restricted, &split.indices1, j, &mut column)?);
            }
            Ok(LearnerParams::Gamma { class0, class1, log_prior_ratio: split.log_prior_ratio() })
        }
    }
}

pub(crate) fn gamma_fit_column(
    data: &LabeledDataset,
    rows: &[usize],
    j: usize,
    scratch: &mut Vec<f64>,
) -> Result<GammaParams> {
    scratch.clear();
    scratch.extend(rows.iter().map(|&i| data.value(i, j)));
    gamma_mle(scratch)
        .map(|(shape, scale)| GammaParams { shape, scale })
        .map_err(|e| fit_failure(format!("Gamma fit of feature {j}: {e}")))
}

/// LDA parameters from a pooled-covariance summary.
pub fn lda_from_summary(summary: &GaussianSummary) -> Result<LearnerParams> {
    let CovarianceModel::Pooled(cov) = &summary.covariance else {
        return Err(fit_failure("LDA needs a pooled covariance"));
    };
    let chol = CholeskyFactor::factor(cov).map_err(|_| fit_failure("singular pooled covariance"))?;
    let direction = chol.solve(&summary.mean_difference());
    Ok(LearnerParams::Lda {
        mean0: summary.mean0.clone(),
        mean1: summary.mean1.clone(),
        cov_inv: chol.inverse(),
        log_prior_ratio: libm::log(summary.pi1_hat / summary.pi0_hat),
        direction,
    })
}

/// QDA parameters from a per-class summary.
pub fn qda_from_summary(summary: &GaussianSummary) -> Result<LearnerParams> {
    let CovarianceModel::PerClass { cov0, cov1 } = &summary.covariance else {
        return Err(fit_failure("QDA needs per-class covariances"));
    };
    let c0 = CholeskyFactor::factor(cov0).map_err(|_| fit_failure("singular class-0 covariance"))?;
    let c1 = CholeskyFactor::factor(cov1).map_err(|_| fit_failure("singular class-1 covariance"))?;
    Ok(LearnerParams::Qda {
        mean0: summary.mean0.clone(),
        mean1: summary.mean1.clone(),
        cov0_inv: c0.inverse(),
        cov1_inv: c1.inverse(),
        logdet0: c0.log_det(),
        logdet1: c1.log_det(),
        log_prior_ratio: libm::log(summary.pi1_hat / summary.pi0_hat),
    })
}

fn knn_fit(restricted: &LabeledDataset, split: &ClassSplit, k_grid: &[usize]) -> Result<LearnerParams> {
    let train = PointColumns::from_dataset(restricted, &Subspace::full(restricted.p()), None);
    let ones_preferred = split.n1 > split.n0;
    let k = select_k(&train, restricted.labels(), k_grid, ones_preferred)?;
    Ok(LearnerParams::Knn { k, train, labels: restricted.labels().to_vec(), ones_preferred })
}

/// Admissible grid values (`k ≤ n − 1`), ascending and deduplicated.
pub(crate) fn usable_grid(k_grid: &[usize], n: usize) -> Result<Vec<usize>> {
    let mut grid: Vec<usize> = k_grid.iter().copied().filter(|&k| k >= 1 && k < n).collect();
    grid.sort_unstable();
    grid.dedup();
    if grid.is_empty() {
        let k = k_grid.iter().copied().min().unwrap_or(0);
        return Err(Error::KTooLarge { k, max: n.saturating_sub(1) });
    }
    Ok(grid)
}

/// Grid value minimizing leave-one-out error; ties go to the smaller `k`.
pub fn select_k(train: &PointColumns, labels: &[u8], k_grid: &[usize], ones_preferred: bool) -> Result<usize> {
    let grid = usable_grid(k_grid, train.len())?;
    let out = loo_knn_counts(train, labels, &grid, ones_preferred, None)?;
    Ok(grid[out.best().0])
}

/// Gamma maximum-likelihood fit, returning `(shape, scale)`.
///
/// Newton's method on `ln α − Ψ(α) = ln(mean) − mean(ln x)`, started from the
/// method-of-moments shape; the scale is then `mean / shape`.
pub fn gamma_mle(values: &[f64]) -> Result<(f64, f64)> {
    if let Some(&bad) = values.iter().find(|v| !(**v > 0.0) || !v.is_finite()) {
        return Err(Error::DomainError(bad));
    }
    let (shape0, _) = gamma_moments(values)?;
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let mean_log = values.iter().map(|v| libm::log(*v)).sum::<f64>() / n;
    let target = libm::log(mean) - mean_log;
    if !(target > 0.0) {
        return Err(Error::DegenerateSample);
    }
    let mut shape = shape0;
    for _ in 0..GAMMA_MAX_ITER {
        let g = libm::log(shape) - digamma_unchecked(shape) - target;
        let dg = 1.0 / shape - trigamma_unchecked(shape);
        let step = g / dg;
        let mut next = shape - step;
        if !(next > 0.0) {
            next = 0.5 * shape;
        }
        let moved = libm::fabs(next - shape);
        shape = next;
        if moved <= GAMMA_STEP_TOL * shape.max(1.0) {
            return Ok((shape, mean / shape));
        }
    }
    Err(Error::NonConvergence)
}

/// Method-of-moments `(shape, scale) = (mean²/var, var/mean)`.
pub fn gamma_moments(values: &[f64]) -> Result<(f64, f64)> {
    if values.len() < 2 {
        return Err(Error::DegenerateSample);
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
    if !(var > 0.0) {
        return Err(Error::DegenerateSample);
    }
    Ok((mean * mean / var, var / mean))
}

/// Residual of the shape score equation at `shape` for this sample.
pub fn gamma_score_residual(values: &[f64], shape: f64) -> f64 {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let mean_log = values.iter().map(|v| libm::log(*v)).sum::<f64>() / n;
    libm::log(shape) - digamma_unchecked(shape) - (libm::log(mean) - mean_log)
}

/// Decision contribution of one Gamma feature: ln f⁽¹⁾(x) − ln f⁽⁰⁾(x).
fn gamma_log_ratio(g0: &GammaParams, g1: &GammaParams, x: f64) -> f64 {
    if x < 0.0 {
        return f64::NEG_INFINITY;
    }
    let mut out = g1.log_norm() - g0.log_norm() - x * (1.0 / g1.scale - 1.0 / g0.scale);
    let dshape = g1.shape - g0.shape;
    if dshape != 0.0 {
        out += dshape * libm::log(x);
    }
    out
}

impl TrainedLearner {
    pub fn dim(&self) -> usize {
        self.subspace.len()
    }

    pub fn kind_name(&self) -> &'static str {
        match self.params {
            LearnerParams::Lda { .. } => "lda",
            LearnerParams::Qda { .. } => "qda",
            LearnerParams::Knn { .. } => "knn",
            LearnerParams::Gamma { .. } => "gamma",
        }
    }

    /// Decision score on a point restricted to the learner's subspace;
    /// class 1 iff the score is positive (k-NN vote ties aside).
    pub fn decision_score(&self, x: &[f64]) -> Result<f64> {
        if x.len() != self.dim() {
            return Err(Error::DimensionMismatch { expected: self.dim(), got: x.len() });
        }
        Ok(self.score_unchecked(x, &mut Vec::new(), &mut Vec::new()))
    }

    fn score_unchecked(&self, x: &[f64], dist: &mut Vec<f64>, top: &mut Vec<(f64, usize)>) -> f64 {
        match &self.params {
            LearnerParams::Lda { mean0, mean1, log_prior_ratio, direction, .. } => {
                let mut s = 0.0;
                for i in 0..x.len() {
                    s += (x[i] - 0.5 * (mean0[i] + mean1[i])) * direction[i];
                }
                log_prior_ratio + s
            }
            LearnerParams::Qda { mean0, mean1, cov0_inv, cov1_inv, logdet0, logdet1, log_prior_ratio } => {
                let c0: Vec<f64> = x.iter().zip(mean0).map(|(a, b)| a - b).collect();
                let c1: Vec<f64> = x.iter().zip(mean1).map(|(a, b)| a - b).collect();
                log_prior_ratio - 0.5 * cov1_inv.quad_form(&c1) + 0.5 * cov0_inv.quad_form(&c0)
                    - 0.5 * (logdet1 - logdet0)
            }
            LearnerParams::Knn { k, train, labels, .. } => {
                train.squared_distances(x, dist);
                nearest_k(dist, *k, None, top);
                let ones = top.iter().filter(|&&(_, j)| labels[j] == 1).count();
                ones as f64 / *k as f64 - 0.5
            }
            LearnerParams::Gamma { class0, class1, log_prior_ratio } => {
                let mut s = *log_prior_ratio;
                for ((g0, g1), &v) in class0.iter().zip(class1).zip(x) {
                    s += gamma_log_ratio(g0, g1, v);
                }
                if s.is_nan() {
                    f64::NEG_INFINITY
                } else {
                    s
                }
            }
        }
    }

    fn label_unchecked(&self, x: &[f64], dist: &mut Vec<f64>, top: &mut Vec<(f64, usize)>) -> u8 {
        match &self.params {
            LearnerParams::Knn { k, train, labels, ones_preferred } => {
                train.squared_distances(x, dist);
                nearest_k(dist, *k, None, top);
                let ones = top.iter().filter(|&&(_, j)| labels[j] == 1).count();
                knn_vote(ones, *k, *ones_preferred)
            }
            _ => (self.score_unchecked(x, dist, top) > 0.0) as u8,
        }
    }

    /// Predicted label for a point restricted to the learner's subspace.
    pub fn predict(&self, x: &[f64]) -> Result<u8> {
        if x.len() != self.dim() {
            return Err(Error::DimensionMismatch { expected: self.dim(), got: x.len() });
        }
        Ok(self.label_unchecked(x, &mut Vec::new(), &mut Vec::new()))
    }

    /// Predicted label for a full-width row.
    pub fn predict_row(&self, row: &[f64]) -> u8 {
        let x: Vec<f64> = self.subspace.indices().iter().map(|&j| row[j]).collect();
        self.label_unchecked(&x, &mut Vec::new(), &mut Vec::new())
    }

    /// Predicted labels for every row of `data` (full width).
    pub fn predict_dataset(&self, data: &LabeledDataset) -> Vec<u8> {
        let mut x = Vec::with_capacity(self.dim());
        let mut dist = Vec::new();
        let mut top = Vec::new();
        (0..data.n())
            .map(|i| {
                data.gather_row(i, &self.subspace, &mut x);
                self.label_unchecked(&x, &mut dist, &mut top)
            })
            .collect()
    }

    /// Decision scores for every row of `data` (full width).
    pub fn score_dataset(&self, data: &LabeledDataset) -> Vec<f64> {
        let mut x = Vec::with_capacity(self.dim());
        let mut dist = Vec::new();
        let mut top = Vec::new();
        (0..data.n())
            .map(|i| {
                data.gather_row(i, &self.subspace, &mut x);
                self.score_unchecked(&x, &mut dist, &mut top)
            })
            .collect()
    }
}

/// In-sample misclassification count of `learner` on `data` (full width).
pub(crate) fn count_errors(learner: &TrainedLearner, data: &LabeledDataset) -> usize {
    learner.predict_dataset(data).iter().zip(data.labels()).filter(|(a, b)| a != b).count()
}
