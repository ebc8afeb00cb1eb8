//! Simulation models with known discriminative features.
//!
//! | model | base  | p   | signal features (1-based) |
//! |-------|-------|-----|---------------------------|
//! | 1     | LDA   | 400 | 1, 2, 5                   |
//! | 1′    | LDA   | 400 | 1..=50                    |
//! | 2     | Gamma | 400 | 1..=5                     |
//! | 3     | QDA   | 200 | 1, 2, 10, 30, 50          |
//! | 4     | k-NN  | 200 | 1..=5                     |
//! | 4′    | k-NN  | 200 | 1..=30                    |
//!
//! Training and test sets come from separate random streams keyed by the
//! seed, so the test set does not depend on the training size.

use alloc::vec;
use alloc::vec::Vec;

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Gamma, StandardNormal};

use crate::base::{fit_on, BaseClassifierKind, TrainedLearner};
use crate::dataset::{LabeledDataset, Subspace};
use crate::error::{Error, Result};
use crate::linalg::{CholeskyFactor, Matrix};
use crate::sampling::substream;

pub const DEFAULT_N_TEST: usize = 1000;

/// Model 3 class-1 mean is `Σ₁ · MODEL3_SHIFT · (e₁ + e₂)`, which puts the
/// linear part of the Bayes rule on features 1 and 2 only. Chosen so the
/// QDA fit on the signal features errs about 22% of the time at n = 1000.
pub const MODEL3_SHIFT: f64 = 0.7;

const STREAM_TAG: u64 = 0x5349_4d55_4c41_5445;
const TRAIN_STREAM: u64 = 0;
const TEST_STREAM: u64 = 1;
const CENTER_STREAM: u64 = 2;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SimModel {
    Model1,
    Model1Prime,
    Model2,
    Model3,
    Model4,
    Model4Prime,
}

impl SimModel {
    pub const ALL: [SimModel; 6] =
        [Self::Model1, Self::Model1Prime, Self::Model2, Self::Model3, Self::Model4, Self::Model4Prime];

    pub fn p(self) -> usize {
        match self {
            Self::Model1 | Self::Model1Prime | Self::Model2 => 400,
            Self::Model3 | Self::Model4 | Self::Model4Prime => 200,
        }
    }

    /// The features the Bayes rule depends on (0-based).
    pub fn signal_features(self) -> Subspace {
        let one_based: Vec<usize> = match self {
            Self::Model1 => vec![1, 2, 5],
            Self::Model1Prime => (1..=50).collect(),
            Self::Model2 | Self::Model4 => (1..=5).collect(),
            Self::Model3 => vec![1, 2, 10, 30, 50],
            Self::Model4Prime => (1..=30).collect(),
        };
        Subspace::from_one_based(&one_based, self.p()).expect("valid by construction")
    }

    /// The base classifier the model is built for.
    pub fn matched_base(self) -> BaseClassifierKind {
        match self {
            Self::Model1 | Self::Model1Prime => BaseClassifierKind::Lda,
            Self::Model2 => BaseClassifierKind::Gamma,
            Self::Model3 => BaseClassifierKind::Qda,
            Self::Model4 | Self::Model4Prime => BaseClassifierKind::knn(),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Self::Model1 => "1",
            Self::Model1Prime => "1p",
            Self::Model2 => "2",
            Self::Model3 => "3",
            Self::Model4 => "4",
            Self::Model4Prime => "4p",
        }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|m| m.name() == name)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SimSpec {
    pub model: SimModel,
    pub n: usize,
    pub n_test: usize,
    pub seed: u64,
}

impl SimSpec {
    pub fn new(model: SimModel, n: usize, seed: u64) -> Self {
        Self { model, n, n_test: DEFAULT_N_TEST, seed }
    }
}

#[derive(Debug, Clone)]
pub struct SimData {
    pub train: LabeledDataset,
    pub test: LabeledDataset,
    pub signal: Subspace,
}

/// Draws a training and a test set from `spec.model`.
pub fn generate(spec: &SimSpec) -> Result<SimData> {
    if spec.n == 0 || spec.n_test == 0 {
        return Err(Error::InvalidConfig("sample sizes must be positive".into()));
    }
    let sampler = Sampler::new(spec.model, spec.seed)?;
    let mut train_rng = substream(spec.seed, STREAM_TAG, TRAIN_STREAM, 0);
    let mut test_rng = substream(spec.seed, STREAM_TAG, TEST_STREAM, 0);
    Ok(SimData {
        train: sampler.draw(spec.n, &mut train_rng)?,
        test: sampler.draw(spec.n_test, &mut test_rng)?,
        signal: spec.model.signal_features(),
    })
}

/// The matched base classifier fitted on the signal features only.
pub fn signal_oracle(model: SimModel, train: &LabeledDataset) -> Result<TrainedLearner> {
    let split = train.class_split()?;
    fit_on(&model.matched_base(), train, &split, &model.signal_features())
}

/// `Σ` with `Σᵢⱼ = 0.5^|i−j|`.
pub fn ar1_covariance(p: usize, rho: f64) -> Matrix {
    let mut m = Matrix::zeros(p, p);
    for i in 0..p {
        for j in 0..p {
            m[(i, j)] = libm::pow(rho, (i as f64 - j as f64).abs());
        }
    }
    m
}

/// Class precision matrices of model 3.
pub fn model3_precisions() -> (Matrix, Matrix) {
    let p = SimModel::Model3.p();
    let mut omega0 = Matrix::zeros(p, p);
    for i in 0..p {
        omega0[(i, i)] = 1.0;
        if i + 1 < p {
            omega0[(i, i + 1)] = 0.3;
            omega0[(i + 1, i)] = 0.3;
        }
    }
    let mut omega1 = omega0.clone();
    let perturbation = [
        (10, 10, -0.3758),
        (10, 30, 0.0616),
        (10, 50, 0.2037),
        (30, 30, -0.5482),
        (30, 50, 0.0286),
        (50, 50, -0.4614),
    ];
    for (i, j, v) in perturbation {
        let (i, j) = (i - 1, j - 1);
        omega1[(i, j)] += v;
        if i != j {
            omega1[(j, i)] += v;
        }
    }
    (omega0, omega1)
}

enum Sampler {
    /// `x = μ_y + L z` with `L Lᵀ = Σ`.
    Lda { mean1: Vec<f64>, chol: CholeskyFactor },
    /// `x = μ_y + L_y⁻ᵀ z` with `L_y L_yᵀ = Ω_y`.
    Qda { mean1: Vec<f64>, prec0: CholeskyFactor, prec1: CholeskyFactor },
    Gamma { class0: Vec<Gamma<f64>>, class1: Vec<Gamma<f64>> },
    Clusters { centers: Vec<Vec<f64>>, p: usize, sd: f64 },
}

impl Sampler {
    fn new(model: SimModel, seed: u64) -> Result<Self> {
        let p = model.p();
        Ok(match model {
            SimModel::Model1 | SimModel::Model1Prime => {
                let sigma = ar1_covariance(p, 0.5);
                let mut beta = vec![0.0; p];
                if model == SimModel::Model1 {
                    beta[0] = 0.556 * 3.0;
                    beta[1] = 0.556 * 1.5;
                    beta[4] = 0.556 * 2.0;
                } else {
                    for (j, b) in beta.iter_mut().take(50).enumerate() {
                        *b = libm::pow(0.9, (j + 1) as f64);
                    }
                }
                let chol = CholeskyFactor::try_factor(&sigma).ok_or(Error::NonPdParameters("model 1 covariance"))?;
                Self::Lda { mean1: sigma.mul_vec(&beta), chol }
            }
            SimModel::Model2 => {
                let mut a0 = vec![1.0; p];
                let mut a1 = vec![1.0; p];
                let mut b0 = vec![1.0; p];
                let mut b1 = vec![1.0; p];
                a0[..5].copy_from_slice(&[2.0, 1.5, 1.5, 2.0, 2.0]);
                a1[..5].copy_from_slice(&[2.5, 1.5, 1.5, 1.0, 1.0]);
                b0[..5].copy_from_slice(&[1.5, 3.0, 1.0, 1.0, 1.0]);
                b1[..5].copy_from_slice(&[2.0, 1.0, 3.0, 1.0, 1.0]);
                let build = |a: &[f64], b: &[f64]| -> Result<Vec<Gamma<f64>>> {
                    a.iter()
                        .zip(b)
                        .map(|(&s, &t)| Gamma::new(s, t).map_err(|_| Error::NonPdParameters("Gamma parameters")))
                        .collect()
                };
                Self::Gamma { class0: build(&a0, &b0)?, class1: build(&a1, &b1)? }
            }
            SimModel::Model3 => {
                let (omega0, omega1) = model3_precisions();
                let prec0 = CholeskyFactor::try_factor(&omega0).ok_or(Error::NonPdParameters("model 3 class-0 precision"))?;
                let prec1 = CholeskyFactor::try_factor(&omega1).ok_or(Error::NonPdParameters("model 3 class-1 precision"))?;
                let mut delta = vec![0.0; p];
                delta[0] = MODEL3_SHIFT;
                delta[1] = MODEL3_SHIFT;
                Self::Qda { mean1: prec1.solve(&delta), prec0, prec1 }
            }
            SimModel::Model4 | SimModel::Model4Prime => {
                let (signals, sd) = if model == SimModel::Model4 { (5, 0.5) } else { (30, libm::sqrt(2.0)) };
                let mut rng = substream(seed, STREAM_TAG, CENTER_STREAM, 0);
                let centers = (0..10).map(|_| (0..signals).map(|_| rng.sample(StandardNormal)).collect()).collect();
                Self::Clusters { centers, p, sd }
            }
        })
    }

    fn draw(&self, n: usize, rng: &mut ChaCha8Rng) -> Result<LabeledDataset> {
        let mut features = Vec::new();
        let mut labels = Vec::with_capacity(n);
        let mut z = Vec::new();
        for _ in 0..n {
            let (y, x) = self.draw_one(rng, &mut z);
            labels.push(y);
            features.extend_from_slice(&x);
        }
        let p = features.len() / n;
        LabeledDataset::new(features, p, labels)
    }

    fn draw_one(&self, rng: &mut ChaCha8Rng, z: &mut Vec<f64>) -> (u8, Vec<f64>) {
        let normals = |len: usize, z: &mut Vec<f64>, rng: &mut ChaCha8Rng| {
            z.clear();
            z.extend((0..len).map(|_| rng.sample::<f64, _>(StandardNormal)));
        };
        match self {
            Self::Lda { mean1, chol } => {
                let y = rng.random_bool(0.5) as u8;
                normals(chol.dim(), z, rng);
                let mut x = chol.lower_mul_vec(z);
                if y == 1 {
                    x.iter_mut().zip(mean1).for_each(|(v, m)| *v += m);
                }
                (y, x)
            }
            Self::Qda { mean1, prec0, prec1 } => {
                let y = rng.random_bool(0.5) as u8;
                normals(prec0.dim(), z, rng);
                let mut x = z.clone();
                if y == 1 {
                    prec1.backward_in_place(&mut x);
                    x.iter_mut().zip(mean1).for_each(|(v, m)| *v += m);
                } else {
                    prec0.backward_in_place(&mut x);
                }
                (y, x)
            }
            Self::Gamma { class0, class1 } => {
                let y = rng.random_bool(0.5) as u8;
                let dists = if y == 1 { class1 } else { class0 };
                (y, dists.iter().map(|d| d.sample(rng)).collect())
            }
            Self::Clusters { centers, p, sd } => {
                let k = rng.random_range(0..centers.len());
                let y = (k >= centers.len() / 2) as u8;
                normals(*p, z, rng);
                let mut x: Vec<f64> = z.iter().map(|v| sd * v).collect();
                x.iter_mut().zip(&centers[k]).for_each(|(v, c)| *v += c);
                (y, x)
            }
        }
    }
}
