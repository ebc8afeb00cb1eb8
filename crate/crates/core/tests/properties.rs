mod common;

use common::*;
use proptest::prelude::*;
use rand::Rng;
use rase_core::base::{fit_on, BaseClassifierKind, LearnerParams, TrainedLearner};
use rase_core::criteria::{argmin_candidate, ric_lda, ric_qda};
use rase_core::dataset::{LabeledDataset, Subspace};
use rase_core::ensemble::select_threshold;
use rase_core::gaussian::{class_covariance_mle, class_means, pooled_covariance_mle};
use rase_core::linalg::{spd_inverse_logdet, Matrix};
use rase_core::sampling::{sample_uniform, sample_weighted, substream};

/// `x ↦ A x + b` applied to every row.
fn affine(data: &LabeledDataset, a: &[Vec<f64>], b: &[f64]) -> LabeledDataset {
    let d = data.p();
    let mut out = Vec::with_capacity(data.n() * d);
    for i in 0..data.n() {
        let x = data.row(i);
        for r in 0..d {
            out.push((0..d).map(|c| a[r][c] * x[c]).sum::<f64>() + b[r]);
        }
    }
    LabeledDataset::new(out, d, data.labels().to_vec()).unwrap()
}

/// A well-conditioned random invertible matrix and shift.
fn random_affine(r: &mut impl Rng, d: usize) -> (Vec<Vec<f64>>, Vec<f64>) {
    let a = (0..d)
        .map(|i| (0..d).map(|j| if i == j { r.random_range(1.0..3.0) } else { r.random_range(-0.4..0.4) }).collect())
        .collect();
    let b = (0..d).map(|_| r.random_range(-5.0..5.0)).collect();
    (a, b)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(50))]

    /// No threshold on a 1000-point grid has fewer training errors than α̂.
    #[test]
    fn threshold_is_grid_optimal(seed in any::<u64>(), b1 in 1usize..60, n in 1usize..80) {
        let mut r = rng(seed);
        let nu: Vec<f64> = (0..n).map(|_| r.random_range(0..=b1) as f64 / b1 as f64).collect();
        let labels: Vec<u8> = (0..n).map(|_| r.random_range(0..2u8)).collect();
        let alpha = select_threshold(&nu, &labels);
        prop_assert!((0.0..=1.0).contains(&alpha));
        let best = threshold_errors(&nu, &labels, alpha);
        for i in 0..1000 {
            let g = i as f64 / 999.0;
            prop_assert!(threshold_errors(&nu, &labels, g) >= best, "grid {g} beats alpha {alpha}");
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(100))]

    /// Adding a feature never shrinks the sample Mahalanobis separation.
    #[test]
    fn mahalanobis_term_grows_with_features(seed in any::<u64>()) {
        let mut r = rng(seed);
        let p = r.random_range(2..=7);
        let n = r.random_range(30..=60);
        let data = random_gaussian_data(&mut r, n, p, 10);
        let split = data.class_split().unwrap();
        let j = r.random_range(0..p);
        let mut rest: Vec<usize> = (0..p).filter(|&i| i != j).collect();
        rest.truncate(r.random_range(1..=rest.len()));
        let small = Subspace::new(rest.clone(), p).unwrap();
        rest.push(j);
        let big = Subspace::new(rest, p).unwrap();
        let a = ric_lda(&data.restrict(&small).unwrap(), &split, 0.0);
        let b = ric_lda(&data.restrict(&big).unwrap(), &split, 0.0);
        prop_assert!(b <= a + 1e-10 * a.abs().max(1.0), "{big:?}: {b} > {small:?}: {a}");
    }

    #[test]
    fn ric_lda_is_affine_invariant(seed in any::<u64>()) {
        let mut r = rng(seed);
        let d = r.random_range(1..=5);
        let n = r.random_range(20..=60);
        let data = random_gaussian_data(&mut r, n, d, d + 3);
        let (a, b) = random_affine(&mut r, d);
        let moved = affine(&data, &a, &b);
        let split = data.class_split().unwrap();
        let (x, y) = (ric_lda(&data, &split, 0.1), ric_lda(&moved, &split, 0.1));
        prop_assert!((x - y).abs() <= 1e-6, "{x} vs {y}");
    }

    /// LDA decision scores agree when train and test points are mapped alike.
    #[test]
    fn lda_scores_are_affine_invariant(seed in any::<u64>()) {
        let mut r = rng(seed);
        let d = r.random_range(1..=5);
        let data = random_gaussian_data(&mut r, 50, d, d + 3);
        let (a, b) = random_affine(&mut r, d);
        let moved = affine(&data, &a, &b);
        let split = data.class_split().unwrap();
        let full = Subspace::full(d);
        let l0 = fit_on(&BaseClassifierKind::Lda, &data, &split, &full).unwrap();
        let l1 = fit_on(&BaseClassifierKind::Lda, &moved, &split, &full).unwrap();
        for i in 0..data.n() {
            let (s0, s1) = (l0.decision_score(data.row(i)).unwrap(), l1.decision_score(moved.row(i)).unwrap());
            prop_assert!((s0 - s1).abs() <= 1e-6 * s0.abs().max(1.0), "{s0} vs {s1}");
        }
    }

    /// Forcing both QDA covariances to the pooled one gives the LDA score.
    #[test]
    fn qda_with_shared_covariance_is_lda(seed in any::<u64>()) {
        let mut r = rng(seed);
        let d = r.random_range(1..=5);
        let data = random_gaussian_data(&mut r, 50, d, d + 3);
        let split = data.class_split().unwrap();
        let lda = fit_on(&BaseClassifierKind::Lda, &data, &split, &Subspace::full(d)).unwrap();
        let LearnerParams::Lda { mean0, mean1, cov_inv, log_prior_ratio, .. } = lda.params.clone() else {
            unreachable!()
        };
        let qda = TrainedLearner {
            subspace: lda.subspace.clone(),
            params: LearnerParams::Qda {
                mean0, mean1, cov0_inv: cov_inv.clone(), cov1_inv: cov_inv, logdet0: 0.7, logdet1: 0.7, log_prior_ratio,
            },
        };
        for i in 0..data.n() {
            let (a, b) = (lda.decision_score(data.row(i)).unwrap(), qda.decision_score(data.row(i)).unwrap());
            prop_assert!((a - b).abs() <= 1e-8 * a.abs().max(1.0), "{a} vs {b}");
        }
    }

    /// With equal class moments imposed and balanced classes, the QDA
    /// criterion reduces to the LDA divergence term plus penalty.
    #[test]
    fn qda_criterion_reduces_to_lda(seed in any::<u64>()) {
        let mut r = rng(seed);
        let d = r.random_range(1..=4);
        let half: Vec<Vec<f64>> = (0..20).map(|_| (0..d).map(|_| r.sample(rand_distr::StandardNormal)).collect()).collect();
        let shift: Vec<f64> = (0..d).map(|_| r.random_range(-2.0..2.0)).collect();
        // class 1 is class 0 translated, so both covariances coincide
        let mut rows = half.clone();
        rows.extend(half.iter().map(|x| x.iter().zip(&shift).map(|(a, b)| a + b).collect::<Vec<f64>>()));
        let labels = (0..40).map(|i| u8::from(i >= 20)).collect();
        let data = LabeledDataset::from_rows(&rows, labels).unwrap();
        let split = data.class_split().unwrap();
        let c_n = 0.05;
        let dd = d as f64;
        let q = ric_qda(&data, &split, c_n) - c_n * (dd * (dd + 3.0) / 2.0 + 1.0);
        let l = ric_lda(&data, &split, c_n) - c_n * (dd + 1.0);
        prop_assert!((q - l).abs() <= 1e-8 * l.abs().max(1.0), "{q} vs {l}");
    }

    #[test]
    fn argmin_is_shift_invariant(seed in any::<u64>(), shift in -100.0f64..100.0) {
        let mut r = rng(seed);
        let p = 8;
        let cands: Vec<Subspace> = (0..30).map(|_| sample_uniform(p, 4, &mut r).unwrap()).collect();
        // coarse scores so that ties occur
        let scores: Vec<f64> = cands.iter().map(|_| r.random_range(0..5) as f64).collect();
        let moved: Vec<f64> = scores.iter().map(|s| s + shift.round()).collect();
        prop_assert_eq!(argmin_candidate(&cands, &scores), argmin_candidate(&cands, &moved));
    }

    #[test]
    fn sampled_subspaces_are_valid(seed in any::<u64>(), p in 1usize..60, d_frac in 0.0f64..1.0) {
        let d = ((p as f64 * d_frac) as usize).clamp(1, p);
        let mut r = substream(seed, 0, 0, 0);
        let w: Vec<f64> = (0..p).map(|_| r.random_range(0.01..1.0)).collect();
        for _ in 0..20 {
            for s in [sample_uniform(p, d, &mut r).unwrap(), sample_weighted(&w, d, &mut r).unwrap()] {
                prop_assert!(!s.is_empty() && s.len() <= d);
                prop_assert!(s.indices().windows(2).all(|x| x[0] < x[1]));
                prop_assert!(s.indices().iter().all(|&j| j < p));
            }
        }
    }

    #[test]
    fn class_split_partitions_rows(labels in proptest::collection::vec(0u8..2, 2..50)) {
        prop_assume!(labels.contains(&0) && labels.contains(&1));
        let n = labels.len();
        let data = LabeledDataset::new(vec![0.0; n], 1, labels).unwrap();
        let s = data.class_split().unwrap();
        let mut all: Vec<usize> = s.indices0.iter().chain(&s.indices1).copied().collect();
        all.sort_unstable();
        prop_assert_eq!(all, (0..n).collect::<Vec<_>>());
        prop_assert!(s.indices0.iter().all(|&i| data.label(i) == 0));
    }

    #[test]
    fn restrict_keeps_index_order(seed in any::<u64>()) {
        let mut r = rng(seed);
        let p = r.random_range(1..10);
        let data = random_gaussian_data(&mut r, 12, p, 3);
        prop_assert_eq!(data.restrict(&Subspace::full(p)).unwrap(), data.clone());
        let s = sample_uniform(p, p, &mut r).unwrap();
        let sub = data.restrict(&s).unwrap();
        for i in 0..data.n() {
            for (k, &j) in s.indices().iter().enumerate() {
                prop_assert_eq!(sub.value(i, k), data.value(i, j));
            }
        }
    }

    #[test]
    fn pooled_covariance_is_prior_weighted(seed in any::<u64>()) {
        let mut r = rng(seed);
        let d = r.random_range(1..=5);
        let data = random_gaussian_data(&mut r, 40, d, 5);
        let split = data.class_split().unwrap();
        let means = class_means(&data, &split).unwrap();
        let pooled = pooled_covariance_mle(&data, &split, &means);
        let mut mix = class_covariance_mle(&data, &split, &means, 0);
        mix.scale(split.pi0_hat);
        mix.add_scaled(split.pi1_hat, &class_covariance_mle(&data, &split, &means, 1));
        prop_assert!(pooled.max_abs_diff(&mix) <= 1e-12);
    }

    #[test]
    fn spd_log_det_matches_elimination(seed in any::<u64>()) {
        let mut r = rng(seed);
        let d = r.random_range(1..=6);
        let g: Vec<Vec<f64>> = (0..d).map(|_| (0..d).map(|_| r.random_range(-1.0..1.0)).collect()).collect();
        let mut a = vec![vec![0.0; d]; d];
        for i in 0..d {
            for j in 0..d {
                a[i][j] = (0..d).map(|k| g[i][k] * g[j][k]).sum::<f64>() + if i == j { 0.1 } else { 0.0 };
            }
        }
        let m = Matrix::from_row_major(d, d, a.concat()).unwrap();
        let f = spd_inverse_logdet(&m).unwrap();
        let (_, want) = inverse_logdet(&a);
        prop_assert_eq!(f.ridge_used, 0.0);
        prop_assert!((f.log_det - want).abs() <= 1e-8, "{} vs {want}", f.log_det);
    }

    #[test]
    fn digamma_recurrence(x in 0.1f64..50.0) {
        let a = rase_core::special::digamma(x + 1.0).unwrap() - rase_core::special::digamma(x).unwrap();
        prop_assert!((a - 1.0 / x).abs() <= 1e-10);
    }
}
