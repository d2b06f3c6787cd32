mod model;
mod table;

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand, ValueEnum};
use coxcindex::concordance::StratumConcordance;
use coxcindex::simulation::SummaryStats;
use coxcindex::{
    breslow_cumhaz, cindex_from_baselines, cindex_linear_predictor, cindex_within_strata, cv_select_lambda,
    fit_cox, fit_lasso_cox, lambda_max, predict_with_policy, ConcordanceReport, CvMetric, ExperimentConfig,
    FitOptions, StratumLabel, UnseenStratumPolicy,
};
use serde::Serialize;

use model::{FitDiagnostics, ModelFile, Schema, Standardization, MODEL_FORMAT_VERSION};
use table::read_table;

const EXIT_NOT_CONVERGED: u8 = 2;

#[derive(Parser, Debug)]
#[command(name = "coxcindex", version, about = "Cox models and baseline-adjusted concordance")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Fit a (stratified, optionally L1-penalized) Cox model and write a JSON model file.
    Fit(FitArgs),
    /// Predict linear predictors and expected survival times from a model file.
    Predict(PredictArgs),
    /// Evaluate a model on a data set with one of the concordance estimators.
    Evaluate(EvaluateArgs),
    /// Cross-validate the L1 penalty over a log-spaced grid.
    Cv(CvArgs),
    /// Run a simulation experiment described by a TOML config file.
    Experiment(ExperimentArgs),
}

#[derive(clap::Args, Debug)]
struct DataArgs {
    /// Input CSV with a header row: `time`, `event`, optional stratum, covariates.
    input: PathBuf,
    /// Name of the stratum column (default: `stratum` when present).
    #[arg(long)]
    strata_col: Option<String>,
}

#[derive(clap::Args, Debug)]
struct FitArgs {
    #[command(flatten)]
    data: DataArgs,
    /// L1 penalty on the raw partial log-likelihood; omit for an unpenalized fit.
    #[arg(long)]
    penalty: Option<f64>,
    /// Center and scale covariates before fitting; coefficients are reported on the original scale.
    #[arg(long)]
    standardize: bool,
    /// Newton iterations (unpenalized) or coordinate sweeps (penalized).
    #[arg(long)]
    max_iter: Option<usize>,
    /// Gradient tolerance for the Newton fit.
    #[arg(long)]
    tol: Option<f64>,
    /// Output model file (default: stdout).
    #[arg(short, long)]
    out: Option<PathBuf>,
}

#[derive(clap::Args, Debug)]
struct PredictArgs {
    /// Model file written by `fit`.
    model: PathBuf,
    #[command(flatten)]
    data: DataArgs,
    /// Leave rows from strata without a baseline empty instead of failing.
    #[arg(long)]
    drop_unseen: bool,
    /// Output CSV (default: stdout).
    #[arg(short, long)]
    out: Option<PathBuf>,
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq)]
enum EvalMetric {
    /// All comparable pairs ranked by the linear predictor.
    Cindex,
    /// Per-stratum C-index, averaged over strata with equal weight.
    WithinStrata,
    /// All comparable pairs ranked by predicted expected survival time.
    BaselineAdjusted,
}

#[derive(clap::Args, Debug)]
struct EvaluateArgs {
    model: PathBuf,
    #[command(flatten)]
    data: DataArgs,
    #[arg(long, value_enum, default_value = "baseline-adjusted")]
    metric: EvalMetric,
    #[arg(short, long)]
    out: Option<PathBuf>,
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq)]
enum CvMetricArg {
    Deviance,
    WithinFoldCindex,
    BaselineAdjustedCindex,
}

impl From<CvMetricArg> for CvMetric {
    fn from(m: CvMetricArg) -> Self {
        match m {
            CvMetricArg::Deviance => CvMetric::Deviance,
            CvMetricArg::WithinFoldCindex => CvMetric::WithinFoldCindex,
            CvMetricArg::BaselineAdjustedCindex => CvMetric::BaselineAdjustedCindex,
        }
    }
}

#[derive(clap::Args, Debug)]
struct CvArgs {
    #[command(flatten)]
    data: DataArgs,
    #[arg(long, default_value_t = 5)]
    folds: usize,
    #[arg(long, value_enum, default_value = "baseline-adjusted-cindex")]
    metric: CvMetricArg,
    /// Number of grid points from lambda_max downwards.
    #[arg(long, default_value_t = 50)]
    n_lambda: usize,
    /// Smallest penalty as a fraction of lambda_max.
    #[arg(long, default_value_t = 0.05)]
    min_ratio: f64,
    /// Explicit comma-separated penalty grid; overrides --n-lambda/--min-ratio.
    #[arg(long, value_delimiter = ',')]
    lambdas: Option<Vec<f64>>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    standardize: bool,
    #[arg(short, long)]
    out: Option<PathBuf>,
}

#[derive(clap::Args, Debug)]
struct ExperimentArgs {
    /// Experiment config (TOML).
    config: PathBuf,
    /// Override the replication count from the config.
    #[arg(long)]
    replications: Option<usize>,
    /// Override the seed from the config.
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads for replications.
    #[arg(long, env = "COXCINDEX_THREADS", default_value_t = 1)]
    threads: usize,
    /// Directory for `results.csv` and `summary.json`.
    #[arg(long, default_value = ".")]
    out_dir: PathBuf,
}

fn write_output(out: Option<&Path>, bytes: &[u8]) -> Result<()> {
    match out {
        Some(path) => fs::write(path, bytes).with_context(|| format!("cannot write {}", path.display())),
        None => {
            let mut stdout = std::io::stdout().lock();
            stdout.write_all(bytes)?;
            stdout.flush()?;
            Ok(())
        }
    }
}

fn to_json<T: Serialize>(value: &T) -> Result<Vec<u8>> {
    let mut bytes = serde_json::to_vec_pretty(value)?;
    bytes.push(b'\n');
    Ok(bytes)
}

fn fit_options(max_iter: Option<usize>, tol: Option<f64>, penalized: bool) -> FitOptions {
    let mut opts = FitOptions::default();
    if let Some(m) = max_iter {
        if penalized {
            opts.max_sweeps = m;
        } else {
            opts.max_iterations = m;
        }
    }
    if let Some(t) = tol {
        opts.gradient_tolerance = t;
    }
    opts
}

fn cmd_fit(args: &FitArgs) -> Result<ExitCode> {
    let table = read_table(&args.data.input, args.data.strata_col.as_deref())?;
    let data = &table.dataset;
    let standardization = args.standardize.then(|| Standardization::estimate(data));
    let working = match &standardization {
        Some(s) => s.apply(data)?,
        None => data.clone(),
    };
    let options = fit_options(args.max_iter, args.tol, args.penalty.is_some());
    options.validate()?;

    let (working_beta, diagnostics) = match args.penalty {
        None => {
            let fit = fit_cox(&working, &options)?;
            let diag = FitDiagnostics {
                method: "newton".into(),
                converged: fit.converged,
                n_iterations: fit.n_iterations,
                log_partial_likelihood: fit.log_partial_likelihood,
                final_gradient_norm: Some(fit.final_gradient_norm),
                kkt_violation: None,
                monotone_likelihood: fit.monotone_likelihood,
                n_observations: data.len(),
                n_events: data.n_events(),
            };
            (fit.beta, diag)
        }
        Some(lambda) => {
            let fit = fit_lasso_cox(&working, lambda, None, &options)?;
            let diag = FitDiagnostics {
                method: "coordinate_descent".into(),
                converged: fit.converged,
                n_iterations: fit.n_sweeps,
                log_partial_likelihood: coxcindex::partial_log_likelihood(&working, &fit.beta)?,
                final_gradient_norm: None,
                kkt_violation: Some(fit.kkt_violation),
                monotone_likelihood: false,
                n_observations: data.len(),
                n_events: data.n_events(),
            };
            (fit.beta, diag)
        }
    };

    if !diagnostics.converged {
        eprintln!("fit did not converge:");
        eprint!("{}", String::from_utf8_lossy(&to_json(&diagnostics)?));
        return Ok(ExitCode::from(EXIT_NOT_CONVERGED));
    }

    let beta = match &standardization {
        Some(s) => s.to_original(&working_beta),
        None => working_beta,
    };
    let baselines = breslow_cumhaz(data, &beta)?;
    let model = ModelFile {
        format_version: MODEL_FORMAT_VERSION,
        schema: Schema::of(&table),
        beta,
        penalty: args.penalty,
        standardization,
        baselines,
        diagnostics,
    };
    write_output(args.out.as_deref(), &to_json(&model)?)?;
    Ok(ExitCode::SUCCESS)
}

fn load_model(path: &Path) -> Result<ModelFile> {
    let text = fs::read_to_string(path).with_context(|| format!("cannot read {}", path.display()))?;
    serde_json::from_str(&text).with_context(|| format!("invalid model file {}", path.display()))
}

fn cmd_predict(args: &PredictArgs) -> Result<ExitCode> {
    let model = load_model(&args.model)?;
    let table = read_table(&args.data.input, args.data.strata_col.as_deref())?;
    model.check_schema(&table)?;
    let policy = if args.drop_unseen {
        UnseenStratumPolicy::Drop
    } else {
        UnseenStratumPolicy::Fail
    };
    let pred = predict_with_policy(&model.beta, &model.baselines, &table.dataset, policy)?;
    let mut writer = csv::Writer::from_writer(Vec::new());
    writer.write_record(["id", "linear_predictor", "expected_time"])?;
    for (i, (lp, t)) in pred.linear_predictors.iter().zip(&pred.times).enumerate() {
        let time = t.map(|v| v.to_string()).unwrap_or_default();
        writer.write_record([(i + 1).to_string(), lp.to_string(), time])?;
    }
    write_output(args.out.as_deref(), &writer.into_inner()?)?;
    if !pred.dropped.is_empty() {
        eprintln!("{} rows had no baseline for their stratum and were left empty", pred.dropped.len());
    }
    Ok(ExitCode::SUCCESS)
}

#[derive(Serialize)]
struct EvaluationOutput {
    format_version: u32,
    metric: &'static str,
    concordant: u64,
    comparable: u64,
    score_ties: u64,
    index: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    per_stratum: Option<Vec<StratumConcordance>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    excluded_strata: Option<Vec<StratumLabel>>,
}

impl EvaluationOutput {
    fn from_report(metric: &'static str, r: ConcordanceReport) -> Self {
        EvaluationOutput {
            format_version: 1,
            metric,
            concordant: r.concordant,
            comparable: r.comparable,
            score_ties: r.score_ties,
            index: r.index,
            per_stratum: None,
            excluded_strata: None,
        }
    }
}

fn cmd_evaluate(args: &EvaluateArgs) -> Result<ExitCode> {
    let model = load_model(&args.model)?;
    let table = read_table(&args.data.input, args.data.strata_col.as_deref())?;
    model.check_schema(&table)?;
    let data = &table.dataset;
    let output = match args.metric {
        EvalMetric::Cindex => EvaluationOutput::from_report("cindex", cindex_linear_predictor(&model.beta, data)?),
        EvalMetric::WithinStrata => {
            let r = cindex_within_strata(&model.beta, data)?;
            EvaluationOutput {
                index: r.index,
                per_stratum: Some(r.per_stratum),
                excluded_strata: Some(r.excluded_strata),
                ..EvaluationOutput::from_report("within_strata", r.pooled)
            }
        }
        EvalMetric::BaselineAdjusted => EvaluationOutput::from_report(
            "baseline_adjusted",
            cindex_from_baselines(&model.beta, &model.baselines, data)?,
        ),
    };
    write_output(args.out.as_deref(), &to_json(&output)?)?;
    Ok(ExitCode::SUCCESS)
}

fn cmd_cv(args: &CvArgs) -> Result<ExitCode> {
    let table = read_table(&args.data.input, args.data.strata_col.as_deref())?;
    let data = if args.standardize {
        Standardization::estimate(&table.dataset).apply(&table.dataset)?
    } else {
        table.dataset.clone()
    };
    let lambdas = match &args.lambdas {
        Some(l) => l.clone(),
        None => coxcindex::lasso::lambda_grid(lambda_max(&data)?, args.n_lambda, args.min_ratio)?,
    };
    let result = cv_select_lambda(&data, args.folds, &lambdas, args.metric.into(), args.seed, &FitOptions::default())?;
    write_output(args.out.as_deref(), &to_json(&result)?)?;
    Ok(ExitCode::SUCCESS)
}

#[derive(Serialize)]
struct ExperimentSummary<'a> {
    format_version: u32,
    name: &'a str,
    kind: &'a str,
    seed: u64,
    replications: usize,
    failed: usize,
    metrics: &'a std::collections::BTreeMap<String, SummaryStats>,
    config: &'a ExperimentConfig,
}

fn cmd_experiment(args: &ExperimentArgs) -> Result<ExitCode> {
    let text = fs::read_to_string(&args.config).with_context(|| format!("cannot read {}", args.config.display()))?;
    let mut config = ExperimentConfig::from_toml(&text)?;
    if let Some(seed) = args.seed {
        config.simulation.seed = seed;
    }
    if let Some(r) = args.replications {
        if r == 0 {
            bail!("--replications must be positive");
        }
        config.replications = r;
    }
    if args.threads == 0 {
        bail!("--threads must be positive");
    }
    let pool = rayon::ThreadPoolBuilder::new().num_threads(args.threads).build()?;
    let result = pool.install(|| config.run(config.replications))?;

    fs::create_dir_all(&args.out_dir).with_context(|| format!("cannot create {}", args.out_dir.display()))?;
    let mut writer = csv::Writer::from_writer(Vec::new());
    writer.write_record(["experiment", "replication", "metric", "value", "lambda", "error"])?;
    let fmt = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
    for rec in &result.replications {
        if let Some(err) = &rec.error {
            writer.write_record([result.name.as_str(), &rec.replication.to_string(), "", "", "", err])?;
        }
        for v in &rec.values {
            writer.write_record([
                result.name.as_str(),
                &rec.replication.to_string(),
                &v.metric,
                &fmt(v.value),
                &fmt(v.lambda),
                "",
            ])?;
        }
    }
    fs::write(args.out_dir.join("results.csv"), writer.into_inner()?)?;
    let summary = ExperimentSummary {
        format_version: 1,
        name: &result.name,
        kind: &result.kind,
        seed: result.seed,
        replications: result.replications.len(),
        failed: result.n_failed,
        metrics: &result.summary,
        config: &config,
    };
    fs::write(args.out_dir.join("summary.json"), to_json(&summary)?)?;
    Ok(ExitCode::SUCCESS)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome = match &cli.command {
        Command::Fit(a) => cmd_fit(a),
        Command::Predict(a) => cmd_predict(a),
        Command::Evaluate(a) => cmd_evaluate(a),
        Command::Cv(a) => cmd_cv(a),
        Command::Experiment(a) => cmd_experiment(a),
    };
    match outcome {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
