//! Labeled binary-classification data, class bookkeeping and feature subspaces.
//!
//! Feature indices are 0-based everywhere in this crate. Conversion to the
//! 1-based labels used in files and reports happens at the I/O boundary
//! through [`Subspace::from_one_based`] and [`Subspace::to_one_based`].

use alloc::vec::Vec;
use core::cmp::Ordering;

use crate::error::{Error, Result};

/// An `n × p` matrix of finite reals (row-major) with a 0/1 label per row.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledDataset {
    features: Vec<f64>,
    labels: Vec<u8>,
    n: usize,
    p: usize,
}

impl LabeledDataset {
    /// Builds a dataset from a row-major feature buffer.
    pub fn new(features: Vec<f64>, p: usize, labels: Vec<u8>) -> Result<Self> {
        if p == 0 {
            return Err(Error::InvalidConfig("dataset needs at least one feature".into()));
        }
        let n = labels.len();
        if features.len() != n * p {
            return Err(Error::DimensionMismatch { expected: n * p, got: features.len() });
        }
        for (row, &y) in labels.iter().enumerate() {
            if y > 1 {
                return Err(Error::InvalidLabel { row, value: y as f64 });
            }
        }
        if let Some(pos) = features.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite { row: pos / p, col: pos % p });
        }
        Ok(Self { features, labels, n, p })
    }

    pub fn from_rows(rows: &[Vec<f64>], labels: Vec<u8>) -> Result<Self> {
        let p = rows.first().map_or(0, Vec::len);
        if rows.len() != labels.len() {
            return Err(Error::DimensionMismatch { expected: rows.len(), got: labels.len() });
        }
        let mut features = Vec::with_capacity(rows.len() * p);
        for row in rows {
            if row.len() != p {
                return Err(Error::DimensionMismatch { expected: p, got: row.len() });
            }
            features.extend_from_slice(row);
        }
        Self::new(features, p, labels)
    }

    #[inline]
    pub fn n(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn p(&self) -> usize {
        self.p
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[f64] {
        &self.features[i * self.p..(i + 1) * self.p]
    }

    #[inline]
    pub fn value(&self, i: usize, j: usize) -> f64 {
        self.features[i * self.p + j]
    }

    #[inline]
    pub fn label(&self, i: usize) -> u8 {
        self.labels[i]
    }

    pub fn labels(&self) -> &[u8] {
        &self.labels
    }

    /// Row-major feature buffer.
    pub fn features(&self) -> &[f64] {
        &self.features
    }

    /// Column slice on `s`; output column `k` is the `k`-th smallest index of `s`.
    pub fn restrict(&self, s: &Subspace) -> Result<LabeledDataset> {
        s.check_against(self.p)?;
        let d = s.len();
        let mut features = Vec::with_capacity(self.n * d);
        for i in 0..self.n {
            let row = self.row(i);
            features.extend(s.indices().iter().map(|&j| row[j]));
        }
        Ok(LabeledDataset { features, labels: self.labels.clone(), n: self.n, p: d })
    }

    /// Copies row `i` restricted to `s` into `out`.
    pub fn gather_row(&self, i: usize, s: &Subspace, out: &mut Vec<f64>) {
        let row = self.row(i);
        out.clear();
        out.extend(s.indices().iter().map(|&j| row[j]));
    }

    /// Rows whose indices are listed, in the given order.
    pub fn select_rows(&self, rows: &[usize]) -> LabeledDataset {
        let mut features = Vec::with_capacity(rows.len() * self.p);
        let mut labels = Vec::with_capacity(rows.len());
        for &i in rows {
            features.extend_from_slice(self.row(i));
            labels.push(self.labels[i]);
        }
        LabeledDataset { features, labels, n: rows.len(), p: self.p }
    }

    /// Partition of the rows by label. Fails if either class is empty.
    pub fn class_split(&self) -> Result<ClassSplit> {
        ClassSplit::from_labels(&self.labels)
    }
}

/// Row indices of each class together with the empirical priors.
#[derive(Debug, Clone, PartialEq)]
pub struct ClassSplit {
    pub indices0: Vec<usize>,
    pub indices1: Vec<usize>,
    pub n0: usize,
    pub n1: usize,
    pub pi0_hat: f64,
    pub pi1_hat: f64,
}

impl ClassSplit {
    pub fn from_labels(labels: &[u8]) -> Result<Self> {
        let mut indices0 = Vec::new();
        let mut indices1 = Vec::new();
        for (i, &y) in labels.iter().enumerate() {
            if y == 0 {
                indices0.push(i);
            } else {
                indices1.push(i);
            }
        }
        if indices0.is_empty() {
            return Err(Error::EmptyClass { class: 0 });
        }
        if indices1.is_empty() {
            return Err(Error::EmptyClass { class: 1 });
        }
        let n = labels.len() as f64;
        let (n0, n1) = (indices0.len(), indices1.len());
        Ok(Self { indices0, indices1, n0, n1, pi0_hat: n0 as f64 / n, pi1_hat: n1 as f64 / n })
    }

    #[inline]
    pub fn n(&self) -> usize {
        self.n0 + self.n1
    }

    pub fn indices(&self, class: u8) -> &[usize] {
        if class == 0 {
            &self.indices0
        } else {
            &self.indices1
        }
    }

    pub fn log_prior_ratio(&self) -> f64 {
        libm::log(self.pi1_hat / self.pi0_hat)
    }
}

/// A nonempty, strictly increasing set of 0-based feature indices.
///
/// Ordering is by size first, then lexicographic on the indices; this is the
/// tie-break order used when two candidate subspaces score equally.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Subspace {
    indices: Vec<usize>,
}

impl Subspace {
    /// Sorts `indices` and validates them against `p`.
    pub fn new(mut indices: Vec<usize>, p: usize) -> Result<Self> {
        indices.sort_unstable();
        let s = Self { indices };
        s.check_against(p)?;
        Ok(s)
    }

    pub fn from_one_based(indices: &[usize], p: usize) -> Result<Self> {
        if indices.iter().any(|&i| i == 0) {
            return Err(Error::InvalidSubspace("1-based index 0"));
        }
        Self::new(indices.iter().map(|i| i - 1).collect(), p)
    }

    pub(crate) fn from_sorted_unchecked(indices: Vec<usize>) -> Self {
        debug_assert!(indices.windows(2).all(|w| w[0] < w[1]));
        Self { indices }
    }

    pub fn full(p: usize) -> Self {
        Self { indices: (0..p).collect() }
    }

    pub fn singleton(j: usize) -> Self {
        Self { indices: alloc::vec![j] }
    }

    pub fn check_against(&self, p: usize) -> Result<()> {
        if self.indices.is_empty() {
            return Err(Error::InvalidSubspace("empty"));
        }
        if self.indices.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::InvalidSubspace("duplicate index"));
        }
        let last = *self.indices.last().unwrap();
        if last >= p {
            return Err(Error::IndexOutOfRange { index: last, p });
        }
        Ok(())
    }

    #[inline]
    pub fn indices(&self) -> &[usize] {
        &self.indices
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }

    pub fn contains(&self, j: usize) -> bool {
        self.indices.binary_search(&j).is_ok()
    }

    pub fn is_superset_of(&self, other: &Subspace) -> bool {
        other.indices.iter().all(|&j| self.contains(j))
    }

    pub fn to_one_based(&self) -> Vec<usize> {
        self.indices.iter().map(|i| i + 1).collect()
    }
}

impl Ord for Subspace {
    fn cmp(&self, other: &Self) -> Ordering {
        self.len().cmp(&other.len()).then_with(|| self.indices.cmp(&other.indices))
    }
}

impl PartialOrd for Subspace {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
