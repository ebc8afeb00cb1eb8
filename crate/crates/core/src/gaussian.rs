//! Maximum-likelihood Gaussian class summaries.
//!
//! All covariance estimates are MLEs: the pooled matrix divides by `n` and the
//! per-class matrices by `n_r`. Entry `(a, b)` of every matrix depends only on
//! columns `a` and `b`, so summaries computed on the full feature set and then
//! restricted with [`GaussianSummary::restrict`] are bit-identical to those
//! computed from a restricted dataset.

use alloc::vec;
use alloc::vec::Vec;

use crate::dataset::{ClassSplit, LabeledDataset, Subspace};
use crate::error::{Error, Result};
use crate::linalg::Matrix;

/// μ̂⁽⁰⁾ and μ̂⁽¹⁾.
pub fn class_means(data: &LabeledDataset, split: &ClassSplit) -> Result<(Vec<f64>, Vec<f64>)> {
    Ok((class_mean(data, &split.indices0, 0)?, class_mean(data, &split.indices1, 1)?))
}

fn class_mean(data: &LabeledDataset, rows: &[usize], class: u8) -> Result<Vec<f64>> {
    if rows.is_empty() {
        return Err(Error::EmptyClass { class });
    }
    let p = data.p();
    let mut mean = vec![0.0; p];
    for &i in rows {
        for (m, v) in mean.iter_mut().zip(data.row(i)) {
            *m += v;
        }
    }
    let nr = rows.len() as f64;
    mean.iter_mut().for_each(|m| *m /= nr);
    Ok(mean)
}

/// Σ over `rows` of `(x - mean)(x - mean)ᵀ`.
pub fn scatter_matrix(data: &LabeledDataset, rows: &[usize], mean: &[f64]) -> Matrix {
    let p = data.p();
    let mut scatter = Matrix::zeros(p, p);
    let mut centered = vec![0.0; p];
    for &i in rows {
        for ((c, v), m) in centered.iter_mut().zip(data.row(i)).zip(mean) {
            *c = v - m;
        }
        for a in 0..p {
            let ca = centered[a];
            for b in a..p {
                scatter[(a, b)] += ca * centered[b];
            }
        }
    }
    for a in 0..p {
        for b in 0..a {
            scatter[(a, b)] = scatter[(b, a)];
        }
    }
    scatter
}

/// Σ̂ = (1/n) Σᵢ Σᵣ 1(yᵢ = r)(xᵢ − μ̂⁽ʳ⁾)(xᵢ − μ̂⁽ʳ⁾)ᵀ.
pub fn pooled_covariance_mle(data: &LabeledDataset, split: &ClassSplit, means: &(Vec<f64>, Vec<f64>)) -> Matrix {
    let mut pooled = scatter_matrix(data, &split.indices0, &means.0);
    pooled.add_scaled(1.0, &scatter_matrix(data, &split.indices1, &means.1));
    pooled.scale(1.0 / split.n() as f64);
    pooled
}

/// Σ̂⁽ʳ⁾ = (1/n_r) Σ 1(yᵢ = r)(xᵢ − μ̂⁽ʳ⁾)(xᵢ − μ̂⁽ʳ⁾)ᵀ.
pub fn class_covariance_mle(
    data: &LabeledDataset,
    split: &ClassSplit,
    means: &(Vec<f64>, Vec<f64>),
    class: u8,
) -> Matrix {
    let (rows, mean) = if class == 0 { (&split.indices0, &means.0) } else { (&split.indices1, &means.1) };
    let mut cov = scatter_matrix(data, rows, mean);
    cov.scale(1.0 / rows.len() as f64);
    cov
}

#[derive(Debug, Clone, PartialEq)]
pub enum CovarianceModel {
    Pooled(Matrix),
    PerClass { cov0: Matrix, cov1: Matrix },
}

/// Plug-in Gaussian parameters for both classes on some feature set.
#[derive(Debug, Clone, PartialEq)]
pub struct GaussianSummary {
    pub mean0: Vec<f64>,
    pub mean1: Vec<f64>,
    pub covariance: CovarianceModel,
    pub pi0_hat: f64,
    pub pi1_hat: f64,
}

impl GaussianSummary {
    /// Shared-covariance (LDA) summary.
    pub fn pooled(data: &LabeledDataset, split: &ClassSplit) -> Result<Self> {
        let means = class_means(data, split)?;
        let cov = pooled_covariance_mle(data, split, &means);
        Ok(Self {
            mean0: means.0,
            mean1: means.1,
            covariance: CovarianceModel::Pooled(cov),
            pi0_hat: split.pi0_hat,
            pi1_hat: split.pi1_hat,
        })
    }

    /// Per-class covariance (QDA) summary.
    pub fn per_class(data: &LabeledDataset, split: &ClassSplit) -> Result<Self> {
        let means = class_means(data, split)?;
        let cov0 = class_covariance_mle(data, split, &means, 0);
        let cov1 = class_covariance_mle(data, split, &means, 1);
        Ok(Self {
            mean0: means.0,
            mean1: means.1,
            covariance: CovarianceModel::PerClass { cov0, cov1 },
            pi0_hat: split.pi0_hat,
            pi1_hat: split.pi1_hat,
        })
    }

    /// Both covariance forms at once; pooled is recombined from the class
    /// scatter matrices.
    pub fn both(data: &LabeledDataset, split: &ClassSplit) -> Result<(Self, Self)> {
        let means = class_means(data, split)?;
        let s0 = scatter_matrix(data, &split.indices0, &means.0);
        let s1 = scatter_matrix(data, &split.indices1, &means.1);
        let mut pooled = s0.clone();
        pooled.add_scaled(1.0, &s1);
        pooled.scale(1.0 / split.n() as f64);
        let mut cov0 = s0;
        cov0.scale(1.0 / split.n0 as f64);
        let mut cov1 = s1;
        cov1.scale(1.0 / split.n1 as f64);
        let lda = Self {
            mean0: means.0.clone(),
            mean1: means.1.clone(),
            covariance: CovarianceModel::Pooled(pooled),
            pi0_hat: split.pi0_hat,
            pi1_hat: split.pi1_hat,
        };
        let qda = Self {
            mean0: means.0,
            mean1: means.1,
            covariance: CovarianceModel::PerClass { cov0, cov1 },
            pi0_hat: split.pi0_hat,
            pi1_hat: split.pi1_hat,
        };
        Ok((lda, qda))
    }

    pub fn dim(&self) -> usize {
        self.mean0.len()
    }

    /// The summary of the sub-model on `s`.
    pub fn restrict(&self, s: &Subspace) -> GaussianSummary {
        let idx = s.indices();
        let pick = |v: &[f64]| idx.iter().map(|&j| v[j]).collect::<Vec<_>>();
        let covariance = match &self.covariance {
            CovarianceModel::Pooled(c) => CovarianceModel::Pooled(c.principal_submatrix(idx)),
            CovarianceModel::PerClass { cov0, cov1 } => CovarianceModel::PerClass {
                cov0: cov0.principal_submatrix(idx),
                cov1: cov1.principal_submatrix(idx),
            },
        };
        GaussianSummary {
            mean0: pick(&self.mean0),
            mean1: pick(&self.mean1),
            covariance,
            pi0_hat: self.pi0_hat,
            pi1_hat: self.pi1_hat,
        }
    }

    /// μ̂⁽¹⁾ − μ̂⁽⁰⁾.
    pub fn mean_difference(&self) -> Vec<f64> {
        self.mean1.iter().zip(&self.mean0).map(|(a, b)| a - b).collect()
    }
}
