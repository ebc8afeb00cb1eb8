//! Replicated simulation benchmark.
//!
//! Every replicate draws a fresh training and test set from the chosen model
//! and scores each requested method on the test set. Replicates run in
//! parallel, but each one is computed single-threaded from its own seed, so
//! the report does not depend on the worker count.

use std::fmt::Write as _;
use std::time::Instant;

use rase_core::base::{fit_on, BaseClassifierKind};
use rase_core::criteria::{CriterionConfig, CriterionKind};
use rase_core::ensemble::{fit_path, EnsembleConfig, DEFAULT_B1, DEFAULT_B2};
use rase_core::sim::{generate, SimModel, SimSpec, DEFAULT_N_TEST};
use serde::Serialize;

use crate::error::CliError;
use crate::model_io::{base_from_name, criterion_from_name};

pub const DEFAULT_N: usize = 200;

/// One benchmarked procedure.
#[derive(Debug, Clone, PartialEq)]
pub enum Method {
    /// RaSE with `iterations` reweighting rounds.
    Rase { base: BaseClassifierKind, iterations: usize },
    /// The base classifier fitted on the true signal features.
    Signal { base: Option<BaseClassifierKind> },
}

impl Method {
    /// Accepts `rase-<base>`, `rase<T>-<base>`, `sig` and `sig-<base>`.
    pub fn parse(s: &str) -> Result<Self, CliError> {
        let bad = || CliError::Usage(format!("--methods: cannot parse {s:?}"));
        if s == "sig" {
            return Ok(Method::Signal { base: None });
        }
        let (head, base) = s.split_once('-').ok_or_else(bad)?;
        let base = base_from_name(base).ok_or_else(bad)?;
        if head == "sig" {
            return Ok(Method::Signal { base: Some(base) });
        }
        let rounds = head.strip_prefix("rase").ok_or_else(bad)?;
        let iterations = if rounds.is_empty() { 0 } else { rounds.parse().map_err(|_| bad())? };
        Ok(Method::Rase { base, iterations })
    }

    pub fn label(&self) -> String {
        match self {
            Method::Rase { base, iterations: 0 } => format!("rase-{}", base.name()),
            Method::Rase { base, iterations } => format!("rase{iterations}-{}", base.name()),
            Method::Signal { base: None } => "sig".into(),
            Method::Signal { base: Some(b) } => format!("sig-{}", b.name()),
        }
    }
}

/// `MODEL` or `MODEL:N`.
pub fn parse_model_spec(s: &str) -> Result<(SimModel, usize), CliError> {
    let bad = || CliError::Usage(format!("--model-spec: cannot parse {s:?}; expected MODEL or MODEL:N"));
    let (name, n) = match s.split_once(':') {
        Some((m, n)) => (m, n.parse::<usize>().map_err(|_| bad())?),
        None => (s, DEFAULT_N),
    };
    let model = SimModel::from_name(name).ok_or_else(bad)?;
    if n < 2 {
        return Err(bad());
    }
    Ok((model, n))
}

#[derive(Debug, Clone)]
pub struct BenchSpec {
    pub model: SimModel,
    pub n: usize,
    pub n_test: usize,
    pub methods: Vec<Method>,
    pub replicates: usize,
    pub seed: u64,
    pub b1: usize,
    pub b2: usize,
    pub d_max: Option<usize>,
    /// Overrides the per-base default criterion for every RaSE method.
    pub criterion: Option<CriterionKind>,
    pub threads: usize,
}

impl BenchSpec {
    pub fn new(model: SimModel, n: usize, methods: Vec<Method>, replicates: usize, seed: u64) -> Self {
        Self {
            model,
            n,
            n_test: DEFAULT_N_TEST,
            methods,
            replicates,
            seed,
            b1: DEFAULT_B1,
            b2: DEFAULT_B2,
            d_max: None,
            criterion: None,
            threads: 1,
        }
    }
}

/// Seed of replicate `r`: a SplitMix64 mix of the master seed and `r`, so
/// adding replicates leaves the earlier ones unchanged.
pub fn replicate_seed(master: u64, r: u64) -> u64 {
    let mut z = master ^ r.wrapping_add(1).wrapping_mul(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

#[derive(Debug, Clone, Serialize)]
pub struct MethodRow {
    pub method: String,
    /// Mean test error in percent, rounded to 2 decimals.
    pub mean_pct: f64,
    /// Sample standard deviation (n − 1) of the test error in percent, rounded to 2 decimals.
    pub sd_pct: f64,
    pub replicates: usize,
    /// Unrounded per-replicate test error rates (fractions).
    pub errors: Vec<f64>,
    /// Per-feature selection frequency averaged over replicates; empty for signal methods.
    pub mean_eta: Vec<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub wall_seconds: Option<f64>,
}

impl MethodRow {
    pub fn mean_error(&self) -> f64 {
        mean(&self.errors)
    }

    pub fn sd_error(&self) -> f64 {
        sample_sd(&self.errors)
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct BenchReport {
    pub model: String,
    pub n: usize,
    pub n_test: usize,
    pub p: usize,
    pub replicates: usize,
    pub seed: u64,
    pub b1: usize,
    pub b2: usize,
    pub sd_convention: &'static str,
    pub rows: Vec<MethodRow>,
}

pub fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

/// Sample standard deviation; 0 for fewer than two values.
pub fn sample_sd(v: &[f64]) -> f64 {
    if v.len() < 2 {
        return 0.0;
    }
    let m = mean(v);
    (v.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (v.len() - 1) as f64).sqrt()
}

fn round2(x: f64) -> f64 {
    format!("{x:.2}").parse().expect("formatted float parses")
}

struct ReplicateResult {
    errors: Vec<f64>,
    etas: Vec<Vec<f64>>,
    seconds: Vec<f64>,
}

fn run_replicate(spec: &BenchSpec, r: usize) -> Result<ReplicateResult, CliError> {
    let seed = replicate_seed(spec.seed, r as u64);
    let data = generate(&SimSpec { model: spec.model, n: spec.n, n_test: spec.n_test, seed })
        .map_err(|e| CliError::Fit(format!("replicate {r}: {e}")))?;
    let k = spec.methods.len();
    let mut out = ReplicateResult { errors: vec![0.0; k], etas: vec![Vec::new(); k], seconds: vec![0.0; k] };
    let fit_err = |e: rase_core::Error| CliError::Fit(format!("replicate {r}: {e}"));

    // RaSE methods sharing a base reuse one fit path up to the largest T.
    let mut done = vec![false; k];
    for i in 0..k {
        let Method::Rase { base, .. } = &spec.methods[i] else { continue };
        if done[i] {
            continue;
        }
        let group: Vec<usize> = (i..k)
            .filter(|&j| matches!(&spec.methods[j], Method::Rase { base: b, .. } if b == base))
            .collect();
        let max_t = group
            .iter()
            .map(|&j| match spec.methods[j] {
                Method::Rase { iterations, .. } => iterations,
                Method::Signal { .. } => 0,
            })
            .max()
            .unwrap_or(0);
        let mut config = EnsembleConfig::new(base.clone());
        config.b1 = spec.b1;
        config.b2 = spec.b2;
        config.d_max = spec.d_max;
        config.iterations = max_t;
        config.seed = seed;
        config.threads = 1;
        if let Some(kind) = &spec.criterion {
            config.criterion = CriterionConfig::new(kind.clone());
        }
        let start = Instant::now();
        let path = fit_path(&data.train, &config).map_err(fit_err)?;
        let elapsed = start.elapsed().as_secs_f64();
        for &j in &group {
            let Method::Rase { iterations, .. } = spec.methods[j] else { unreachable!() };
            let model = &path[iterations];
            out.errors[j] = model.misclassification_rate(&data.test).map_err(fit_err)?;
            out.etas[j] = model.eta().to_vec();
            out.seconds[j] = elapsed;
            done[j] = true;
        }
    }
    for (i, m) in spec.methods.iter().enumerate() {
        let Method::Signal { base } = m else { continue };
        let base = base.clone().unwrap_or_else(|| spec.model.matched_base());
        let start = Instant::now();
        let split = data.train.class_split().map_err(fit_err)?;
        let learner = fit_on(&base, &data.train, &split, &data.signal).map_err(fit_err)?;
        let pred = learner.predict_dataset(&data.test);
        let wrong = pred.iter().zip(data.test.labels()).filter(|(a, b)| a != b).count();
        out.errors[i] = wrong as f64 / data.test.n() as f64;
        out.seconds[i] = start.elapsed().as_secs_f64();
    }
    Ok(out)
}

/// Runs the benchmark. `timing` adds wall-clock seconds to the rows, which
/// makes the output vary between runs.
pub fn run_bench(spec: &BenchSpec, timing: bool) -> Result<BenchReport, CliError> {
    if spec.replicates == 0 {
        return Err(CliError::Usage("--replicates must be positive".into()));
    }
    if spec.methods.is_empty() {
        return Err(CliError::Usage("--methods must list at least one method".into()));
    }
    if spec.b1 == 0 || spec.b2 == 0 {
        return Err(CliError::Usage("--b1 and --b2 must be positive".into()));
    }
    let threads = spec.threads.max(1).min(spec.replicates);
    let results: Vec<Result<ReplicateResult, CliError>> = if threads > 1 {
        use rayon::prelude::*;
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .map_err(|e| CliError::Fit(e.to_string()))?;
        pool.install(|| (0..spec.replicates).into_par_iter().map(|r| run_replicate(spec, r)).collect())
    } else {
        (0..spec.replicates).map(|r| run_replicate(spec, r)).collect()
    };
    let results = results.into_iter().collect::<Result<Vec<_>, _>>()?;

    let p = spec.model.p();
    let rows = spec
        .methods
        .iter()
        .enumerate()
        .map(|(i, m)| {
            let errors: Vec<f64> = results.iter().map(|r| r.errors[i]).collect();
            let mean_eta = match m {
                Method::Rase { .. } => (0..p)
                    .map(|j| results.iter().map(|r| r.etas[i][j]).sum::<f64>() / results.len() as f64)
                    .collect(),
                Method::Signal { .. } => Vec::new(),
            };
            MethodRow {
                method: m.label(),
                mean_pct: round2(100.0 * mean(&errors)),
                sd_pct: round2(100.0 * sample_sd(&errors)),
                replicates: errors.len(),
                errors,
                mean_eta,
                wall_seconds: timing.then(|| results.iter().map(|r| r.seconds[i]).sum()),
            }
        })
        .collect();
    Ok(BenchReport {
        model: spec.model.name().to_string(),
        n: spec.n,
        n_test: spec.n_test,
        p,
        replicates: spec.replicates,
        seed: spec.seed,
        b1: spec.b1,
        b2: spec.b2,
        sd_convention: "sample (n-1)",
        rows,
    })
}

/// Number of top features listed per method in the text report.
const TEXT_TOP_FEATURES: usize = 5;

impl BenchReport {
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(
            s,
            "# model {} n={} n_test={} p={} replicates={} seed={} B1={} B2={}",
            self.model, self.n, self.n_test, self.p, self.replicates, self.seed, self.b1, self.b2
        );
        let _ = writeln!(s, "# test error in percent; sd is the sample (n-1) standard deviation over replicates");
        let width = self.rows.iter().map(|r| r.method.len()).max().unwrap_or(0).max("method".len());
        let timing = self.rows.iter().any(|r| r.wall_seconds.is_some());
        let _ = write!(s, "{:<width$}  {:>8}  {:>8}  {:>4}", "method", "mean", "sd", "reps");
        if timing {
            let _ = write!(s, "  {:>10}", "seconds");
        }
        let _ = writeln!(s, "  top features (eta)");
        for r in &self.rows {
            let _ = write!(s, "{:<width$}  {:>8.2}  {:>8.2}  {:>4}", r.method, r.mean_pct, r.sd_pct, r.replicates);
            if let Some(t) = r.wall_seconds {
                let _ = write!(s, "  {t:>10.2}");
            }
            let top: Vec<String> = rase_core::ensemble::feature_ranking(&r.mean_eta)
                .into_iter()
                .take(TEXT_TOP_FEATURES)
                .map(|(j, e)| format!("{}:{e:.2}", j + 1))
                .collect();
            let _ = writeln!(s, "  {}", if top.is_empty() { "-".to_string() } else { top.join(" ") });
        }
        s
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }
}

pub fn parse_methods(list: &str) -> Result<Vec<Method>, CliError> {
    list.split(',').map(str::trim).filter(|s| !s.is_empty()).map(Method::parse).collect()
}

pub fn parse_criterion(name: &str) -> Result<CriterionKind, CliError> {
    criterion_from_name(name).ok_or_else(|| CliError::Usage(format!("--criterion: unknown criterion {name:?}")))
}
