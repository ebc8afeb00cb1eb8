//! Argument parsing and subcommand dispatch.

use std::fmt::Write as _;
use std::io::Write as _;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use rase_core::criteria::CriterionConfig;
use rase_core::ensemble::{fit_iterative, EnsembleConfig, DEFAULT_B1, DEFAULT_B2, DEFAULT_C0};
use rase_core::sim::{generate, SimModel, SimSpec, DEFAULT_N_TEST};
use rase_core::Error;

use crate::bench::{parse_criterion, parse_methods, parse_model_spec, run_bench, BenchSpec};
use crate::csv_io::{format_value, load_dataset, read_table, save_dataset};
use crate::error::CliError;
use crate::model_io::{base_from_name, load_model, save_model};

#[derive(Debug, Parser)]
#[command(name = "rase", version, about = "Random subspace ensemble classification")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Draw training and test sets from a simulation model.
    Simulate(SimulateArgs),
    /// Fit an ensemble to a labeled CSV file.
    Fit(FitArgs),
    /// Score and classify the rows of a CSV file.
    Predict(PredictArgs),
    /// List features by selection frequency.
    Rank(RankArgs),
    /// Run replicated simulations and summarize test errors.
    Bench(BenchArgs),
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    /// One of 1, 1p, 2, 3, 4, 4p.
    #[arg(long)]
    pub model: String,
    #[arg(long)]
    pub n: usize,
    #[arg(long, default_value_t = DEFAULT_N_TEST)]
    pub n_test: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out_train: PathBuf,
    #[arg(long)]
    pub out_test: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum BaseArg {
    Lda,
    Qda,
    Knn,
    Gamma,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum CriterionArg {
    Ric,
    RicNp,
    TrainErr,
    Loo,
}

impl CriterionArg {
    fn name(self) -> &'static str {
        match self {
            CriterionArg::Ric => "ric",
            CriterionArg::RicNp => "ric-np",
            CriterionArg::TrainErr => "train-err",
            CriterionArg::Loo => "loo",
        }
    }
}

impl BaseArg {
    fn name(self) -> &'static str {
        match self {
            BaseArg::Lda => "lda",
            BaseArg::Qda => "qda",
            BaseArg::Knn => "knn",
            BaseArg::Gamma => "gamma",
        }
    }
}

#[derive(Debug, Args)]
pub struct FitArgs {
    #[arg(long)]
    pub train: PathBuf,
    #[arg(long, value_enum)]
    pub base: BaseArg,
    /// Defaults to ric for lda, qda and gamma and to loo for knn.
    #[arg(long, value_enum)]
    pub criterion: Option<CriterionArg>,
    #[arg(long, default_value_t = DEFAULT_B1)]
    pub b1: usize,
    #[arg(long, default_value_t = DEFAULT_B2)]
    pub b2: usize,
    /// Maximum subspace size.
    #[arg(long)]
    pub d: Option<usize>,
    /// Penalty constant of the information criteria; defaults to ln(n)/n.
    #[arg(long)]
    pub cn: Option<f64>,
    #[arg(long, default_value_t = DEFAULT_C0)]
    pub c0: f64,
    #[arg(long, default_value_t = 0)]
    pub iterations: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, env = "RASE_THREADS", default_value_t = 1)]
    pub threads: usize,
    #[arg(long)]
    pub model_out: PathBuf,
}

#[derive(Debug, Args)]
pub struct PredictArgs {
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long)]
    pub data: PathBuf,
    /// Output CSV with columns `score` and `prediction`; stdout if omitted.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct RankArgs {
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long)]
    pub top: Option<usize>,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum ReportFormat {
    Text,
    Json,
}

#[derive(Debug, Args)]
pub struct BenchArgs {
    /// MODEL or MODEL:N, e.g. `1`, `2:400`, `4:1000`.
    #[arg(long)]
    pub model_spec: String,
    /// Comma-separated list such as `rase-lda,rase1-lda,sig`.
    #[arg(long)]
    pub methods: String,
    #[arg(long, default_value_t = 10)]
    pub replicates: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = DEFAULT_N_TEST)]
    pub n_test: usize,
    #[arg(long, default_value_t = DEFAULT_B1)]
    pub b1: usize,
    #[arg(long, default_value_t = DEFAULT_B2)]
    pub b2: usize,
    #[arg(long)]
    pub d: Option<usize>,
    /// Criterion for every RaSE method instead of the per-base default.
    #[arg(long, value_enum)]
    pub criterion: Option<CriterionArg>,
    #[arg(long, env = "RASE_THREADS", default_value_t = 1)]
    pub threads: usize,
    #[arg(long, value_enum, default_value_t = ReportFormat::Text)]
    pub format: ReportFormat,
    /// Also write the JSON report here.
    #[arg(long)]
    pub json_out: Option<PathBuf>,
    /// Include wall-clock seconds (output is then no longer reproducible).
    #[arg(long)]
    pub timing: bool,
}

/// Maps core errors on user data to exit code 2, bad settings to 1 and the rest to 3.
fn classify(e: Error, context: &str) -> CliError {
    let msg = format!("{context}: {e}");
    match e {
        Error::InvalidConfig(_) => CliError::Usage(msg),
        Error::EmptyClass { .. }
        | Error::InvalidLabel { .. }
        | Error::NonFinite { .. }
        | Error::DimensionMismatch { .. }
        | Error::IndexOutOfRange { .. } => CliError::Data(msg),
        _ => CliError::Fit(msg),
    }
}

fn write_out(path: Option<&PathBuf>, text: &str) -> Result<(), CliError> {
    match path {
        Some(p) => std::fs::write(p, text).map_err(|e| CliError::Data(format!("{}: {e}", p.display()))),
        None => std::io::stdout().write_all(text.as_bytes()).map_err(|e| CliError::Data(e.to_string())),
    }
}

pub fn simulate(args: &SimulateArgs) -> Result<(), CliError> {
    let model = SimModel::from_name(&args.model)
        .ok_or_else(|| CliError::Usage(format!("--model: unknown model {:?}; expected 1, 1p, 2, 3, 4 or 4p", args.model)))?;
    if args.n == 0 || args.n_test == 0 {
        return Err(CliError::Usage("--n and --n-test must be positive".into()));
    }
    let data = generate(&SimSpec { model, n: args.n, n_test: args.n_test, seed: args.seed })
        .map_err(|e| classify(e, "simulate"))?;
    save_dataset(&data.train, &args.out_train)?;
    if let Some(p) = &args.out_test {
        save_dataset(&data.test, p)?;
    }
    Ok(())
}

pub fn fit(args: &FitArgs) -> Result<String, CliError> {
    let data = load_dataset(&args.train)?;
    let base = base_from_name(args.base.name()).expect("known base");
    let mut config = EnsembleConfig::new(base);
    if let Some(c) = args.criterion {
        config.criterion = CriterionConfig::new(parse_criterion(c.name())?);
    }
    config.criterion.c_n = args.cn;
    config.b1 = args.b1;
    config.b2 = args.b2;
    config.d_max = args.d;
    config.c0 = args.c0;
    config.iterations = args.iterations;
    config.seed = args.seed;
    config.threads = args.threads.max(1);
    config.validate().map_err(|e| classify(e, "fit"))?;
    let model = fit_iterative(&data, &config).map_err(|e| classify(e, &args.train.display().to_string()))?;
    save_model(&model, &args.model_out)?;
    let train_err = model.misclassification_rate(&data).map_err(|e| classify(e, "fit"))?;
    Ok(format!(
        "fitted {} learners (D = {}), alpha_hat = {}, training error = {:.2}%\n",
        model.learners().len(),
        model.d_max(),
        format_value(model.alpha_hat()),
        100.0 * train_err
    ))
}

pub fn predict(args: &PredictArgs) -> Result<(), CliError> {
    let model = load_model(&args.model)?;
    let table = read_table(&args.data)?;
    if table.p != model.p() {
        return Err(CliError::Data(format!(
            "{}: {} feature columns, model expects {}",
            args.data.display(),
            table.p,
            model.p()
        )));
    }
    let mut out = String::from("score,prediction\n");
    for row in table.features.chunks(table.p) {
        let score = model.predict_score(row).map_err(|e| classify(e, "predict"))?;
        let label = u8::from(score > model.alpha_hat());
        let _ = writeln!(out, "{},{label}", format_value(score));
    }
    write_out(args.out.as_ref(), &out)
}

pub fn rank(args: &RankArgs) -> Result<String, CliError> {
    let model = load_model(&args.model)?;
    let ranking = model.feature_ranking();
    let top = args.top.unwrap_or(ranking.len());
    let mut out = String::from("feature,eta\n");
    for (j, eta) in ranking.into_iter().take(top) {
        let _ = writeln!(out, "{},{}", j + 1, format_value(eta));
    }
    Ok(out)
}

pub fn bench(args: &BenchArgs) -> Result<(), CliError> {
    let (model, n) = parse_model_spec(&args.model_spec)?;
    let mut spec = BenchSpec::new(model, n, parse_methods(&args.methods)?, args.replicates, args.seed);
    spec.n_test = args.n_test;
    spec.b1 = args.b1;
    spec.b2 = args.b2;
    spec.d_max = args.d;
    spec.criterion = args.criterion.map(|c| parse_criterion(c.name())).transpose()?;
    spec.threads = args.threads.max(1);
    if spec.d_max == Some(0) {
        return Err(CliError::Usage("--d must be positive".into()));
    }
    let report = run_bench(&spec, args.timing)?;
    if let Some(p) = &args.json_out {
        write_out(Some(p), &report.to_json())?;
    }
    let text = match args.format {
        ReportFormat::Text => report.to_text(),
        ReportFormat::Json => report.to_json() + "\n",
    };
    write_out(None, &text)
}

pub fn dispatch(cli: &Cli) -> Result<(), CliError> {
    match &cli.command {
        Command::Simulate(a) => simulate(a),
        Command::Fit(a) => fit(a).and_then(|s| write_out(None, &s)),
        Command::Predict(a) => predict(a),
        Command::Rank(a) => rank(a).and_then(|s| write_out(None, &s)),
        Command::Bench(a) => bench(a),
    }
}

/// Parses `args` (including the program name) and runs the command,
/// returning the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match dispatch(&cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("rase: {e}");
            e.exit_code()
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use clap::CommandFactory;

    #[test]
    fn clap_definition_is_consistent() {
        Cli::command().debug_assert();
    }

    #[test]
    fn usage_errors_exit_1() {
        assert_eq!(run(["rase"]), 1);
        assert_eq!(run(["rase", "fit", "--base", "svm"]), 1);
        assert_eq!(run(["rase", "simulate", "--model", "9", "--n", "10", "--out-train", "/dev/null"]), 1);
        assert_eq!(run(["rase", "--help"]), 0);
    }
}
