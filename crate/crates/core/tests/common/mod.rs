//! Reference implementations used as test oracles. They are written for
//! clarity, not speed, and share no code with the library beyond the data
//! containers.

#![allow(dead_code)]

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Gamma, StandardNormal};
use rase_core::dataset::LabeledDataset;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Inverse and ln|det| by Gauss–Jordan elimination with partial pivoting.
pub fn inverse_logdet(a: &[Vec<f64>]) -> (Vec<Vec<f64>>, f64) {
    let d = a.len();
    let mut m: Vec<Vec<f64>> = a.to_vec();
    let mut inv: Vec<Vec<f64>> = (0..d).map(|i| (0..d).map(|j| f64::from(u8::from(i == j))).collect()).collect();
    let mut logdet = 0.0;
    for c in 0..d {
        let piv = (c..d).max_by(|&i, &j| m[i][c].abs().total_cmp(&m[j][c].abs())).unwrap();
        m.swap(c, piv);
        inv.swap(c, piv);
        let p = m[c][c];
        assert!(p.abs() > 1e-300, "singular matrix in oracle");
        logdet += p.abs().ln();
        for j in 0..d {
            m[c][j] /= p;
            inv[c][j] /= p;
        }
        for i in 0..d {
            if i != c {
                let f = m[i][c];
                if f != 0.0 {
                    for j in 0..d {
                        m[i][j] -= f * m[c][j];
                        inv[i][j] -= f * inv[c][j];
                    }
                }
            }
        }
    }
    (inv, logdet)
}

pub fn mean_of(rows: &[&[f64]]) -> Vec<f64> {
    let d = rows[0].len();
    let mut m = vec![0.0; d];
    for r in rows {
        for (a, b) in m.iter_mut().zip(r.iter()) {
            *a += b;
        }
    }
    m.iter().map(|v| v / rows.len() as f64).collect()
}

/// `Σ (x − μ)(x − μ)ᵀ` over `rows`.
pub fn scatter(rows: &[&[f64]], mu: &[f64]) -> Vec<Vec<f64>> {
    let d = mu.len();
    let mut s = vec![vec![0.0; d]; d];
    for r in rows {
        for i in 0..d {
            for j in 0..d {
                s[i][j] += (r[i] - mu[i]) * (r[j] - mu[j]);
            }
        }
    }
    s
}

pub fn scale(m: &[Vec<f64>], f: f64) -> Vec<Vec<f64>> {
    m.iter().map(|r| r.iter().map(|v| v * f).collect()).collect()
}

pub struct GaussianDensity {
    pub mean: Vec<f64>,
    pub prec: Vec<Vec<f64>>,
    pub logdet: f64,
}

impl GaussianDensity {
    pub fn new(mean: Vec<f64>, cov: &[Vec<f64>]) -> Self {
        let (prec, logdet) = inverse_logdet(cov);
        Self { mean, prec, logdet }
    }

    pub fn log_pdf(&self, x: &[f64]) -> f64 {
        let d = x.len();
        let diff: Vec<f64> = x.iter().zip(&self.mean).map(|(a, b)| a - b).collect();
        let mut q = 0.0;
        for i in 0..d {
            for j in 0..d {
                q += diff[i] * self.prec[i][j] * diff[j];
            }
        }
        -0.5 * (d as f64) * (2.0 * std::f64::consts::PI).ln() - 0.5 * self.logdet - 0.5 * q
    }
}

fn class_rows(data: &LabeledDataset, class: u8) -> Vec<&[f64]> {
    (0..data.n()).filter(|&i| data.label(i) == class).map(|i| data.row(i)).collect()
}

/// The information criterion straight from its definition: minus twice the
/// prior-weighted empirical averages of the fitted log-density ratios, plus
/// the penalty.
pub fn plugin_ric(
    data: &LabeledDataset,
    log_f0: impl Fn(&[f64]) -> f64,
    log_f1: impl Fn(&[f64]) -> f64,
    penalty: f64,
) -> f64 {
    let x0 = class_rows(data, 0);
    let x1 = class_rows(data, 1);
    let n = data.n() as f64;
    let (pi0, pi1) = (x0.len() as f64 / n, x1.len() as f64 / n);
    let kl01 = x0.iter().map(|x| log_f0(x) - log_f1(x)).sum::<f64>() / x0.len() as f64;
    let kl10 = x1.iter().map(|x| log_f1(x) - log_f0(x)).sum::<f64>() / x1.len() as f64;
    -2.0 * (pi0 * kl01 + pi1 * kl10) + penalty
}

/// Plug-in criterion for Gaussian classes sharing the pooled MLE covariance.
pub fn plugin_ric_lda(data: &LabeledDataset, c_n: f64) -> f64 {
    let (x0, x1) = (class_rows(data, 0), class_rows(data, 1));
    let (m0, m1) = (mean_of(&x0), mean_of(&x1));
    let mut s = scatter(&x0, &m0);
    let s1 = scatter(&x1, &m1);
    for (a, b) in s.iter_mut().zip(&s1) {
        for (u, v) in a.iter_mut().zip(b) {
            *u += v;
        }
    }
    let cov = scale(&s, 1.0 / data.n() as f64);
    let f0 = GaussianDensity::new(m0, &cov);
    let f1 = GaussianDensity::new(m1, &cov);
    let d = data.p() as f64;
    plugin_ric(data, |x| f0.log_pdf(x), |x| f1.log_pdf(x), c_n * (d + 1.0))
}

/// Plug-in criterion for Gaussian classes with their own MLE covariances.
pub fn plugin_ric_qda(data: &LabeledDataset, c_n: f64) -> f64 {
    let (x0, x1) = (class_rows(data, 0), class_rows(data, 1));
    let (m0, m1) = (mean_of(&x0), mean_of(&x1));
    let c0 = scale(&scatter(&x0, &m0), 1.0 / x0.len() as f64);
    let c1 = scale(&scatter(&x1, &m1), 1.0 / x1.len() as f64);
    let f0 = GaussianDensity::new(m0, &c0);
    let f1 = GaussianDensity::new(m1, &c1);
    let d = data.p() as f64;
    plugin_ric(data, |x| f0.log_pdf(x), |x| f1.log_pdf(x), c_n * (d * (d + 3.0) / 2.0 + 1.0))
}

/// Log density of a Gamma law with the given shape and scale.
pub fn gamma_log_pdf(shape: f64, scale: f64, x: f64) -> f64 {
    use statrs::distribution::{Continuous, Gamma as G};
    G::new(shape, 1.0 / scale).unwrap().ln_pdf(x)
}

/// Plug-in criterion for independent Gamma marginals; `params[c][j]` is the
/// (shape, scale) fitted to feature `j` of class `c`.
pub fn plugin_ric_gamma(data: &LabeledDataset, params: &[Vec<(f64, f64)>; 2], c_n: f64) -> f64 {
    let lf = |c: usize, x: &[f64]| -> f64 {
        x.iter().zip(&params[c]).map(|(&v, &(a, b))| gamma_log_pdf(a, b, v)).sum()
    };
    let d = data.p() as f64;
    plugin_ric(data, |x| lf(0, x), |x| lf(1, x), c_n * (2.0 * d + 1.0))
}

/// KL(Ga(a, b) ‖ Ga(a', b')) by quadrature of `f ln(f/g)` in `u = ln x`.
pub fn gamma_kl_quadrature(a: f64, b: f64, a2: f64, b2: f64) -> f64 {
    let lo = (b * 1e-12).ln() - 40.0 / a.max(1.0);
    let hi = (b * (a + 60.0 * a.sqrt() + 60.0)).ln();
    let steps = 200_000;
    let h = (hi - lo) / steps as f64;
    let g = |u: f64| {
        let x = u.exp();
        let lf = gamma_log_pdf(a, b, x);
        let lg = gamma_log_pdf(a2, b2, x);
        let f = lf.exp();
        if f == 0.0 {
            0.0
        } else {
            f * (lf - lg) * x
        }
    };
    // composite Simpson
    let mut s = g(lo) + g(hi);
    for i in 1..steps {
        let w = if i % 2 == 1 { 4.0 } else { 2.0 };
        s += w * g(lo + i as f64 * h);
    }
    s * h / 3.0
}

/// Random two-class data with `d` columns, correlated features and shifted
/// class means. Each class gets at least `min_per_class` rows.
pub fn random_gaussian_data(rng: &mut impl Rng, n: usize, d: usize, min_per_class: usize) -> LabeledDataset {
    let n0 = rng.random_range(min_per_class..=n - min_per_class);
    let mix: Vec<Vec<f64>> =
        (0..d).map(|_| (0..d).map(|_| rng.sample::<f64, _>(StandardNormal)).collect()).collect();
    let shift: Vec<f64> = (0..d).map(|_| rng.sample::<f64, _>(StandardNormal)).collect();
    let stretch: Vec<f64> = (0..d).map(|_| rng.random_range(0.5..2.0)).collect();
    let mut features = Vec::with_capacity(n * d);
    let mut labels = Vec::with_capacity(n);
    for i in 0..n {
        let y = u8::from(i >= n0);
        let z: Vec<f64> = (0..d).map(|_| rng.sample::<f64, _>(StandardNormal)).collect();
        for r in 0..d {
            let mut v: f64 = (0..d).map(|c| mix[r][c] * z[c]).sum::<f64>() + 0.5 * z[r];
            if y == 1 {
                v = v * stretch[r] + shift[r];
            }
            features.push(v);
        }
        labels.push(y);
    }
    LabeledDataset::new(features, d, labels).unwrap()
}

/// Random two-class data with positive Gamma-distributed features.
pub fn random_gamma_data(rng: &mut impl Rng, n: usize, d: usize, min_per_class: usize) -> LabeledDataset {
    let n0 = rng.random_range(min_per_class..=n - min_per_class);
    let laws: Vec<[Gamma<f64>; 2]> = (0..d)
        .map(|_| {
            let mut law = || Gamma::new(rng.random_range(0.5..6.0), rng.random_range(0.3..3.0)).unwrap();
            [law(), law()]
        })
        .collect();
    let mut features = Vec::with_capacity(n * d);
    let mut labels = Vec::with_capacity(n);
    for i in 0..n {
        let y = usize::from(i >= n0);
        for law in &laws {
            features.push(law[y].sample(rng).max(1e-300));
        }
        labels.push(y as u8);
    }
    LabeledDataset::new(features, d, labels).unwrap()
}

/// Brute-force k nearest neighbours of row `i` among the other rows,
/// ordered by (squared distance, index).
pub fn brute_neighbors(rows: &[Vec<f64>], i: usize, k: usize) -> Vec<usize> {
    let mut all: Vec<(f64, usize)> = rows
        .iter()
        .enumerate()
        .filter(|&(j, _)| j != i)
        .map(|(j, r)| (rows[i].iter().zip(r).map(|(a, b)| (a - b) * (a - b)).sum::<f64>(), j))
        .collect();
    all.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
    all.into_iter().take(k).map(|(_, j)| j).collect()
}

/// Leave-one-out k-NN errors by brute force. Vote ties go to class 1 only
/// when `ones_preferred`.
pub fn brute_loo_errors(rows: &[Vec<f64>], labels: &[u8], k: usize, ones_preferred: bool) -> usize {
    (0..rows.len())
        .filter(|&i| {
            let ones = brute_neighbors(rows, i, k).iter().filter(|&&j| labels[j] == 1).count();
            let pred = match (2 * ones).cmp(&k) {
                std::cmp::Ordering::Greater => 1,
                std::cmp::Ordering::Less => 0,
                std::cmp::Ordering::Equal => u8::from(ones_preferred),
            };
            pred != labels[i]
        })
        .count()
}

/// Errors of every threshold on a fine grid over [0, 1]; the vote rule is
/// "predict 1 iff ν > α".
pub fn threshold_errors(nu: &[f64], labels: &[u8], alpha: f64) -> usize {
    nu.iter().zip(labels).filter(|&(&v, &y)| u8::from(v > alpha) != y).count()
}
