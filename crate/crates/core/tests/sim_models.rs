use rase_core::dataset::LabeledDataset;
use rase_core::linalg::CholeskyFactor;
use rase_core::sim::{ar1_covariance, generate, model3_precisions, signal_oracle, SimModel, SimSpec};

fn draw(model: SimModel, n: usize, seed: u64) -> LabeledDataset {
    generate(&SimSpec { model, n, n_test: 1, seed }).unwrap().train
}

#[test]
fn label_proportions_are_balanced() {
    let n = 100_000;
    for model in [SimModel::Model1, SimModel::Model2, SimModel::Model3] {
        let data = draw(model, n, 1);
        let ones = data.labels().iter().filter(|&&y| y == 1).count() as f64 / n as f64;
        assert!((ones - 0.5).abs() <= 3.0 * (0.25 / n as f64).sqrt(), "model {}: {ones}", model.name());
    }
}

#[test]
fn model_1_class_0_mean_is_zero() {
    let data = draw(SimModel::Model1, 100_000, 2);
    let rows: Vec<usize> = (0..data.n()).filter(|&i| data.label(i) == 0).collect();
    let m = rows.len() as f64;
    for j in 0..data.p() {
        let mean = rows.iter().map(|&i| data.value(i, j)).sum::<f64>() / m;
        // unit marginal variance
        assert!(mean.abs() <= 4.0 / m.sqrt(), "feature {j}: {mean}");
    }
}

#[test]
fn specified_matrices_are_positive_definite() {
    assert!(CholeskyFactor::try_factor(&ar1_covariance(400, 0.5)).is_some());
    let (o0, o1) = model3_precisions();
    assert!(CholeskyFactor::try_factor(&o0).is_some());
    assert!(CholeskyFactor::try_factor(&o1).is_some());
}

#[test]
fn generation_is_deterministic_per_seed() {
    for model in SimModel::ALL {
        let a = generate(&SimSpec { model, n: 30, n_test: 20, seed: 5 }).unwrap();
        let b = generate(&SimSpec { model, n: 30, n_test: 20, seed: 5 }).unwrap();
        let c = generate(&SimSpec { model, n: 30, n_test: 20, seed: 6 }).unwrap();
        assert_eq!(a.train, b.train);
        assert_eq!(a.test, b.test);
        assert_ne!(a.train, c.train);
        assert_eq!(a.train.p(), model.p());
    }
}

#[test]
fn signal_oracle_uses_only_signal_features() {
    for model in SimModel::ALL {
        let d = generate(&SimSpec { model, n: 400, n_test: 1000, seed: 3 }).unwrap();
        let l = signal_oracle(model, &d.train).unwrap();
        assert_eq!(l.subspace, model.signal_features());
        let pred = l.predict_dataset(&d.test);
        let err = pred.iter().zip(d.test.labels()).filter(|(a, b)| a != b).count() as f64 / 1000.0;
        assert!(err < 0.35, "model {}: {err}", model.name());
    }
}

#[test]
fn model_4_test_set_shares_the_cluster_centers() {
    // Clusters are well separated from the origin only through their centres:
    // a 1-NN rule trained on one sample should classify the other sample far
    // better than chance, which fails if the centres were redrawn.
    let d = generate(&SimSpec { model: SimModel::Model4, n: 1000, n_test: 500, seed: 8 }).unwrap();
    let l = signal_oracle(SimModel::Model4, &d.train).unwrap();
    let pred = l.predict_dataset(&d.test);
    let err = pred.iter().zip(d.test.labels()).filter(|(a, b)| a != b).count() as f64 / 500.0;
    assert!(err < 0.2, "{err}");
}
