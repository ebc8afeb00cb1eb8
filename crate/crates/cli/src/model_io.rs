//! Versioned JSON persistence for fitted ensembles.
//!
//! kNN learners carry only their subspace and `k`; the point sets are rebuilt
//! from the training data embedded once at the top level.

use std::path::Path;

use rase_core::base::{BaseClassifierKind, GammaParams, LearnerParams, TrainedLearner};
use rase_core::criteria::{CriterionConfig, CriterionKind};
use rase_core::dataset::{LabeledDataset, Subspace};
use rase_core::ensemble::{EnsembleConfig, RaseModel};
use rase_core::linalg::Matrix;
use rase_core::neighbors::PointColumns;
use serde::{Deserialize, Serialize};

use crate::error::CliError;

pub const FORMAT_VERSION: u32 = 1;

/// Stored `eta` may differ from the recomputed one by at most this much.
const ETA_TOL: f64 = 1e-12;

#[derive(Debug, Serialize, Deserialize)]
struct ModelFile {
    format_version: u32,
    config: ConfigDto,
    p: usize,
    d_max: usize,
    alpha_hat: f64,
    eta: Vec<f64>,
    learners: Vec<LearnerDto>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    training: Option<TrainingDto>,
}

#[derive(Debug, Serialize, Deserialize)]
struct ConfigDto {
    base: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    k_grid: Option<Vec<usize>>,
    criterion: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    c_n: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    k0: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    k1: Option<usize>,
    b1: usize,
    b2: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    d: Option<usize>,
    iterations: usize,
    c0: f64,
    seed: u64,
    threads: usize,
}

#[derive(Debug, Serialize, Deserialize)]
struct TrainingDto {
    p: usize,
    features: Vec<f64>,
    labels: Vec<u8>,
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
struct GammaDto {
    shape: f64,
    scale: f64,
}

/// Subspaces are stored 1-based.
#[derive(Debug, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase")]
enum LearnerDto {
    Lda {
        subspace: Vec<usize>,
        mean0: Vec<f64>,
        mean1: Vec<f64>,
        cov_inv: Vec<Vec<f64>>,
        log_prior_ratio: f64,
        direction: Vec<f64>,
    },
    Qda {
        subspace: Vec<usize>,
        mean0: Vec<f64>,
        mean1: Vec<f64>,
        cov0_inv: Vec<Vec<f64>>,
        cov1_inv: Vec<Vec<f64>>,
        logdet0: f64,
        logdet1: f64,
        log_prior_ratio: f64,
    },
    Knn {
        subspace: Vec<usize>,
        k: usize,
    },
    Gamma {
        subspace: Vec<usize>,
        class0: Vec<GammaDto>,
        class1: Vec<GammaDto>,
        log_prior_ratio: f64,
    },
}

pub fn base_from_name(name: &str) -> Option<BaseClassifierKind> {
    Some(match name {
        "lda" => BaseClassifierKind::Lda,
        "qda" => BaseClassifierKind::Qda,
        "knn" => BaseClassifierKind::knn(),
        "gamma" => BaseClassifierKind::Gamma,
        _ => return None,
    })
}

pub fn criterion_name(kind: &CriterionKind) -> &'static str {
    match kind {
        CriterionKind::RicParametric => "ric",
        CriterionKind::RicNonparametric { .. } => "ric-np",
        CriterionKind::TrainingError => "train-err",
        CriterionKind::LooCv => "loo",
    }
}

pub fn criterion_from_name(name: &str) -> Option<CriterionKind> {
    Some(match name {
        "ric" => CriterionKind::RicParametric,
        "ric-np" => CriterionKind::RicNonparametric { k0: None, k1: None },
        "train-err" => CriterionKind::TrainingError,
        "loo" => CriterionKind::LooCv,
        _ => return None,
    })
}

fn bad(msg: impl Into<String>) -> CliError {
    CliError::Data(format!("model file: {}", msg.into()))
}

fn matrix_rows(m: &Matrix) -> Vec<Vec<f64>> {
    (0..m.rows()).map(|i| m.row(i).to_vec()).collect()
}

fn matrix_from_rows(rows: Vec<Vec<f64>>, d: usize) -> Result<Matrix, CliError> {
    if rows.len() != d || rows.iter().any(|r| r.len() != d) {
        return Err(bad(format!("matrix is not {d} x {d}")));
    }
    Matrix::from_row_major(d, d, rows.concat()).map_err(|e| bad(e.to_string()))
}

fn config_to_dto(c: &EnsembleConfig) -> ConfigDto {
    let (k0, k1) = match c.criterion.kind {
        CriterionKind::RicNonparametric { k0, k1 } => (k0, k1),
        _ => (None, None),
    };
    ConfigDto {
        base: c.base.name().to_string(),
        k_grid: match &c.base {
            BaseClassifierKind::Knn { k_grid } => Some(k_grid.clone()),
            _ => None,
        },
        criterion: criterion_name(&c.criterion.kind).to_string(),
        c_n: c.criterion.c_n,
        k0,
        k1,
        b1: c.b1,
        b2: c.b2,
        d: c.d_max,
        iterations: c.iterations,
        c0: c.c0,
        seed: c.seed,
        threads: c.threads,
    }
}

fn config_from_dto(dto: ConfigDto) -> Result<EnsembleConfig, CliError> {
    let mut base = base_from_name(&dto.base).ok_or_else(|| bad(format!("unknown base classifier {:?}", dto.base)))?;
    if let (BaseClassifierKind::Knn { k_grid }, Some(grid)) = (&mut base, dto.k_grid) {
        *k_grid = grid;
    }
    let mut kind =
        criterion_from_name(&dto.criterion).ok_or_else(|| bad(format!("unknown criterion {:?}", dto.criterion)))?;
    if let CriterionKind::RicNonparametric { k0, k1 } = &mut kind {
        *k0 = dto.k0;
        *k1 = dto.k1;
    }
    let config = EnsembleConfig {
        b1: dto.b1,
        b2: dto.b2,
        d_max: dto.d,
        base,
        criterion: CriterionConfig { kind, c_n: dto.c_n },
        iterations: dto.iterations,
        c0: dto.c0,
        seed: dto.seed,
        threads: dto.threads,
    };
    config.validate().map_err(|e| bad(e.to_string()))?;
    Ok(config)
}

fn gamma_dto(g: &[GammaParams]) -> Vec<GammaDto> {
    g.iter().map(|g| GammaDto { shape: g.shape, scale: g.scale }).collect()
}

fn learner_to_dto(l: &TrainedLearner) -> LearnerDto {
    let subspace = l.subspace.to_one_based();
    match &l.params {
        LearnerParams::Lda { mean0, mean1, cov_inv, log_prior_ratio, direction } => LearnerDto::Lda {
            subspace,
            mean0: mean0.clone(),
            mean1: mean1.clone(),
            cov_inv: matrix_rows(cov_inv),
            log_prior_ratio: *log_prior_ratio,
            direction: direction.clone(),
        },
        LearnerParams::Qda { mean0, mean1, cov0_inv, cov1_inv, logdet0, logdet1, log_prior_ratio } => {
            LearnerDto::Qda {
                subspace,
                mean0: mean0.clone(),
                mean1: mean1.clone(),
                cov0_inv: matrix_rows(cov0_inv),
                cov1_inv: matrix_rows(cov1_inv),
                logdet0: *logdet0,
                logdet1: *logdet1,
                log_prior_ratio: *log_prior_ratio,
            }
        }
        LearnerParams::Knn { k, .. } => LearnerDto::Knn { subspace, k: *k },
        LearnerParams::Gamma { class0, class1, log_prior_ratio } => LearnerDto::Gamma {
            subspace,
            class0: gamma_dto(class0),
            class1: gamma_dto(class1),
            log_prior_ratio: *log_prior_ratio,
        },
    }
}

fn check_len(v: &[f64], d: usize, what: &str) -> Result<(), CliError> {
    if v.len() != d {
        return Err(bad(format!("{what} has length {}, expected {d}", v.len())));
    }
    Ok(())
}

fn learner_from_dto(dto: LearnerDto, p: usize, training: Option<&LabeledDataset>) -> Result<TrainedLearner, CliError> {
    let one_based = match &dto {
        LearnerDto::Lda { subspace, .. }
        | LearnerDto::Qda { subspace, .. }
        | LearnerDto::Knn { subspace, .. }
        | LearnerDto::Gamma { subspace, .. } => subspace.clone(),
    };
    let subspace = Subspace::from_one_based(&one_based, p).map_err(|e| bad(e.to_string()))?;
    if subspace.len() != one_based.len() {
        return Err(bad("learner subspace lists a feature twice"));
    }
    let d = subspace.len();
    let params = match dto {
        LearnerDto::Lda { mean0, mean1, cov_inv, log_prior_ratio, direction, .. } => {
            check_len(&mean0, d, "mean0")?;
            check_len(&mean1, d, "mean1")?;
            check_len(&direction, d, "direction")?;
            LearnerParams::Lda { mean0, mean1, cov_inv: matrix_from_rows(cov_inv, d)?, log_prior_ratio, direction }
        }
        LearnerDto::Qda { mean0, mean1, cov0_inv, cov1_inv, logdet0, logdet1, log_prior_ratio, .. } => {
            check_len(&mean0, d, "mean0")?;
            check_len(&mean1, d, "mean1")?;
            LearnerParams::Qda {
                mean0,
                mean1,
                cov0_inv: matrix_from_rows(cov0_inv, d)?,
                cov1_inv: matrix_from_rows(cov1_inv, d)?,
                logdet0,
                logdet1,
                log_prior_ratio,
            }
        }
        LearnerDto::Knn { k, .. } => {
            let train = training.ok_or_else(|| bad("kNN learners need the embedded training data"))?;
            if k == 0 || k >= train.n() {
                return Err(bad(format!("kNN learner has k = {k} for {} training rows", train.n())));
            }
            let n1 = train.labels().iter().filter(|&&y| y == 1).count();
            LearnerParams::Knn {
                k,
                train: PointColumns::from_dataset(train, &subspace, None),
                labels: train.labels().to_vec(),
                ones_preferred: n1 > train.n() - n1,
            }
        }
        LearnerDto::Gamma { class0, class1, log_prior_ratio, .. } => {
            if class0.len() != d || class1.len() != d {
                return Err(bad("Gamma learner parameter count does not match its subspace"));
            }
            let conv = |g: Vec<GammaDto>| -> Result<Vec<GammaParams>, CliError> {
                g.into_iter()
                    .map(|g| {
                        if g.shape > 0.0 && g.scale > 0.0 {
                            Ok(GammaParams { shape: g.shape, scale: g.scale })
                        } else {
                            Err(bad("Gamma shape and scale must be positive"))
                        }
                    })
                    .collect()
            };
            LearnerParams::Gamma { class0: conv(class0)?, class1: conv(class1)?, log_prior_ratio }
        }
    };
    Ok(TrainedLearner { subspace, params })
}

pub fn model_to_json(model: &RaseModel) -> Result<String, CliError> {
    let training = model.training_data().map(|t| TrainingDto {
        p: t.p(),
        features: t.features().to_vec(),
        labels: t.labels().to_vec(),
    });
    let file = ModelFile {
        format_version: FORMAT_VERSION,
        config: config_to_dto(model.config()),
        p: model.p(),
        d_max: model.d_max(),
        alpha_hat: model.alpha_hat(),
        eta: model.eta().to_vec(),
        learners: model.learners().iter().map(learner_to_dto).collect(),
        training,
    };
    let value = serde_json::to_value(&file).map_err(|e| CliError::Fit(e.to_string()))?;
    // non-finite floats become null, which would not load back
    if contains_null(&value) {
        return Err(CliError::Fit("model contains non-finite parameters".into()));
    }
    serde_json::to_string_pretty(&value).map_err(|e| CliError::Fit(e.to_string()))
}

fn contains_null(v: &serde_json::Value) -> bool {
    match v {
        serde_json::Value::Null => true,
        serde_json::Value::Array(a) => a.iter().any(contains_null),
        serde_json::Value::Object(o) => o.values().any(contains_null),
        _ => false,
    }
}

pub fn model_from_json(text: &str) -> Result<RaseModel, CliError> {
    let value: serde_json::Value = serde_json::from_str(text).map_err(|e| bad(e.to_string()))?;
    let version = value
        .get("format_version")
        .and_then(serde_json::Value::as_u64)
        .ok_or_else(|| bad("missing format_version"))?;
    if version > u64::from(FORMAT_VERSION) {
        return Err(bad(format!("format_version {version} is newer than the supported {FORMAT_VERSION}")));
    }
    if version == 0 {
        return Err(bad("format_version 0 is not valid"));
    }
    let file: ModelFile = serde_json::from_value(value).map_err(|e| bad(e.to_string()))?;
    let config = config_from_dto(file.config)?;
    let training = match file.training {
        Some(t) => {
            if t.p != file.p {
                return Err(bad("training data width differs from p"));
            }
            Some(LabeledDataset::new(t.features, t.p, t.labels).map_err(|e| bad(e.to_string()))?)
        }
        None => None,
    };
    if file.eta.len() != file.p {
        return Err(bad("eta length differs from p"));
    }
    let learners = file
        .learners
        .into_iter()
        .map(|l| learner_from_dto(l, file.p, training.as_ref()))
        .collect::<Result<Vec<_>, _>>()?;
    let model = RaseModel::from_parts(config, file.p, file.d_max, learners, file.alpha_hat, training)
        .map_err(|e| bad(e.to_string()))?;
    if model.eta().iter().zip(&file.eta).any(|(a, b)| (a - b).abs() > ETA_TOL) {
        return Err(bad("stored eta does not match the learners"));
    }
    Ok(model)
}

pub fn save_model(model: &RaseModel, path: &Path) -> Result<(), CliError> {
    let text = model_to_json(model)?;
    std::fs::write(path, text).map_err(|e| CliError::Data(format!("{}: {e}", path.display())))
}

pub fn load_model(path: &Path) -> Result<RaseModel, CliError> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::Data(format!("{}: {e}", path.display())))?;
    model_from_json(&text)
}
