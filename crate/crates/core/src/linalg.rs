//! Small dense matrices and the Cholesky machinery behind covariance inverses.

use alloc::vec;
use alloc::vec::Vec;
use core::ops::{Index, IndexMut};

use crate::error::{Error, Result};

/// Ridge multipliers tried, in order, when a factorization fails.
pub const RIDGE_LEVELS: [f64; 3] = [1e-10, 1e-8, 1e-6];

/// Pivots below this fraction of the corresponding diagonal entry count as zero.
const PIVOT_TOL: f64 = 1e-13;

/// Row-major dense matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Matrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self { rows, cols, data: vec![0.0; rows * cols] }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = 1.0;
        }
        m
    }

    pub fn from_diag(diag: &[f64]) -> Self {
        let mut m = Self::zeros(diag.len(), diag.len());
        for (i, &v) in diag.iter().enumerate() {
            m[(i, i)] = v;
        }
        m
    }

    pub fn from_row_major(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::DimensionMismatch { expected: rows * cols, got: data.len() });
        }
        Ok(Self { rows, cols, data })
    }

    #[inline]
    pub fn rows(&self) -> usize {
        self.rows
    }

    #[inline]
    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.data
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    /// The square block indexed by `idx` on both axes.
    pub fn principal_submatrix(&self, idx: &[usize]) -> Matrix {
        let d = idx.len();
        let mut data = Vec::with_capacity(d * d);
        for &i in idx {
            let row = self.row(i);
            data.extend(idx.iter().map(|&j| row[j]));
        }
        Matrix { rows: d, cols: d, data }
    }

    pub fn mul(&self, other: &Matrix) -> Result<Matrix> {
        if self.cols != other.rows {
            return Err(Error::DimensionMismatch { expected: self.cols, got: other.rows });
        }
        let mut out = Matrix::zeros(self.rows, other.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let a = self[(i, k)];
                if a == 0.0 {
                    continue;
                }
                for j in 0..other.cols {
                    out.data[i * other.cols + j] += a * other[(k, j)];
                }
            }
        }
        Ok(out)
    }

    pub fn mul_vec(&self, v: &[f64]) -> Vec<f64> {
        debug_assert_eq!(v.len(), self.cols);
        (0..self.rows).map(|i| dot(self.row(i), v)).collect()
    }

    /// `vᵀ M v`.
    pub fn quad_form(&self, v: &[f64]) -> f64 {
        (0..self.rows).map(|i| v[i] * dot(self.row(i), v)).sum()
    }

    pub fn trace(&self) -> f64 {
        (0..self.rows.min(self.cols)).map(|i| self[(i, i)]).sum()
    }

    pub fn max_abs_diff(&self, other: &Matrix) -> f64 {
        self.data.iter().zip(&other.data).fold(0.0, |m, (a, b)| f64::max(m, libm::fabs(a - b)))
    }

    /// Largest `|a_ij - a_ji|` relative to the largest absolute entry.
    pub fn asymmetry(&self) -> f64 {
        let scale = self.data.iter().fold(0.0f64, |m, v| m.max(libm::fabs(*v)));
        if scale == 0.0 {
            return 0.0;
        }
        let mut worst = 0.0f64;
        for i in 0..self.rows {
            for j in 0..i {
                worst = worst.max(libm::fabs(self[(i, j)] - self[(j, i)]));
            }
        }
        worst / scale
    }

    pub fn scale(&mut self, factor: f64) {
        self.data.iter_mut().for_each(|v| *v *= factor);
    }

    /// `self += factor * other`.
    pub fn add_scaled(&mut self, factor: f64, other: &Matrix) {
        for (a, b) in self.data.iter_mut().zip(&other.data) {
            *a += factor * b;
        }
    }
}

impl Index<(usize, usize)> for Matrix {
    type Output = f64;

    #[inline]
    fn index(&self, (i, j): (usize, usize)) -> &f64 {
        &self.data[i * self.cols + j]
    }
}

impl IndexMut<(usize, usize)> for Matrix {
    #[inline]
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut f64 {
        &mut self.data[i * self.cols + j]
    }
}

#[inline]
pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Lower Cholesky factor `L` with `L Lᵀ = A + ridge·I`.
#[derive(Debug, Clone)]
pub struct CholeskyFactor {
    n: usize,
    lower: Vec<f64>,
    ridge_used: f64,
}

impl CholeskyFactor {
    /// Factorizes without stabilization; `None` when `a` is not numerically PD.
    pub fn try_factor(a: &Matrix) -> Option<Self> {
        factor_with_shift(a, 0.0).map(|lower| Self { n: a.rows, lower, ridge_used: 0.0 })
    }

    /// Factorizes, retrying with `λ · mean(diag)` added to the diagonal for each
    /// `λ` in [`RIDGE_LEVELS`].
    pub fn factor(a: &Matrix) -> Result<Self> {
        if a.rows != a.cols {
            return Err(Error::DimensionMismatch { expected: a.rows, got: a.cols });
        }
        if let Some(f) = Self::try_factor(a) {
            return Ok(f);
        }
        let n = a.rows;
        let mean_diag = if n == 0 { 0.0 } else { a.trace() / n as f64 };
        if !(mean_diag > 0.0) || !mean_diag.is_finite() {
            return Err(Error::SingularMatrix);
        }
        for lambda in RIDGE_LEVELS {
            let ridge = lambda * mean_diag;
            if let Some(lower) = factor_with_shift(a, ridge) {
                return Ok(Self { n, lower, ridge_used: ridge });
            }
        }
        Err(Error::SingularMatrix)
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn ridge_used(&self) -> f64 {
        self.ridge_used
    }

    pub fn log_det(&self) -> f64 {
        2.0 * (0..self.n).map(|i| libm::log(self.lower[i * self.n + i])).sum::<f64>()
    }

    /// Solves `L y = b` in place.
    pub fn forward_in_place(&self, b: &mut [f64]) {
        let n = self.n;
        for i in 0..n {
            let row = &self.lower[i * n..i * n + i];
            let s = b[i] - dot(row, &b[..i]);
            b[i] = s / self.lower[i * n + i];
        }
    }

    /// Solves `Lᵀ x = y` in place.
    pub fn backward_in_place(&self, y: &mut [f64]) {
        let n = self.n;
        for i in (0..n).rev() {
            let mut s = y[i];
            for k in i + 1..n {
                s -= self.lower[k * n + i] * y[k];
            }
            y[i] = s / self.lower[i * n + i];
        }
    }

    /// `L z`.
    pub fn lower_mul_vec(&self, z: &[f64]) -> Vec<f64> {
        let n = self.n;
        (0..n).map(|i| dot(&self.lower[i * n..i * n + i + 1], &z[..=i])).collect()
    }

    /// `(A + ridge·I)⁻¹ b`.
    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        let mut x = b.to_vec();
        self.forward_in_place(&mut x);
        self.backward_in_place(&mut x);
        x
    }

    /// `bᵀ (A + ridge·I)⁻¹ b`, via a single triangular solve.
    pub fn inverse_quad_form(&self, b: &[f64], scratch: &mut Vec<f64>) -> f64 {
        scratch.clear();
        scratch.extend_from_slice(b);
        self.forward_in_place(scratch);
        scratch.iter().map(|v| v * v).sum()
    }

    pub fn inverse(&self) -> Matrix {
        let n = self.n;
        let mut inv = Matrix::zeros(n, n);
        let mut col = vec![0.0; n];
        for j in 0..n {
            col.iter_mut().for_each(|v| *v = 0.0);
            col[j] = 1.0;
            self.forward_in_place(&mut col);
            self.backward_in_place(&mut col);
            for i in 0..n {
                inv[(i, j)] = col[i];
            }
        }
        // symmetrize away rounding noise
        for i in 0..n {
            for j in 0..i {
                let v = 0.5 * (inv[(i, j)] + inv[(j, i)]);
                inv[(i, j)] = v;
                inv[(j, i)] = v;
            }
        }
        inv
    }
}

fn factor_with_shift(a: &Matrix, shift: f64) -> Option<Vec<f64>> {
    let n = a.rows;
    let mut l = vec![0.0; n * n];
    for j in 0..n {
        let ajj = a[(j, j)] + shift;
        let s = ajj - l[j * n..j * n + j].iter().map(|v| v * v).sum::<f64>();
        if !(s > PIVOT_TOL * libm::fabs(ajj)) || !s.is_finite() {
            return None;
        }
        let ljj = libm::sqrt(s);
        l[j * n + j] = ljj;
        for i in j + 1..n {
            let (upper, lower) = l.split_at_mut(i * n);
            let s = a[(i, j)] - dot(&lower[..j], &upper[j * n..j * n + j]);
            lower[j] = s / ljj;
        }
    }
    Some(l)
}

/// Inverse and log-determinant of a symmetric positive-definite matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct SpdFactorization {
    pub inverse: Matrix,
    pub log_det: f64,
    pub ridge_used: f64,
}

/// Cholesky-based inverse and log-determinant with ridge escalation.
pub fn spd_inverse_logdet(m: &Matrix) -> Result<SpdFactorization> {
    let chol = CholeskyFactor::factor(m)?;
    Ok(SpdFactorization { inverse: chol.inverse(), log_det: chol.log_det(), ridge_used: chol.ridge_used })
}
