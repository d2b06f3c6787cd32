//! Synthetic survival data and the two Monte-Carlo experiments.
//!
//! Survival times follow a Cox model with a constant baseline hazard per
//! stratum, drawn by inverse transform. Every replication owns an independent
//! ChaCha stream derived from `(seed, replication)`, so serial and parallel
//! runs produce identical results.

use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp, Open01, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::concordance::{cindex_baseline_adjusted, cindex_linear_predictor, cindex_within_strata};
use crate::cox::{fit_cox, FitOptions};
use crate::cv::{cv_grid, kfold_split, CvMetric};
use crate::data::{Dataset, Observation};
use crate::error::{Error, Result};
use crate::lasso::{fit_path, lambda_grid, lambda_max};

/// Linear predictors are clamped to this magnitude before exponentiation.
pub const ETA_CAP: f64 = 30.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum CovariateDesign {
    IidNormal,
    /// Stationary AR(1) across the coordinates of each observation.
    Ar1 { rho: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Censoring {
    None,
    Exponential { rate: f64 },
}

/// A product term `coef · X_first · X_second` in the true linear predictor.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Interaction {
    pub first: usize,
    pub second: usize,
    pub coef: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimConfig {
    pub n: usize,
    pub d: usize,
    pub beta_true: Vec<f64>,
    pub covariates: CovariateDesign,
    /// Constant baseline hazard per stratum; the number of strata is its length.
    pub baseline_hazards: Vec<f64>,
    pub censoring: Censoring,
    #[serde(default)]
    pub interaction: Option<Interaction>,
    pub seed: u64,
}

impl SimConfig {
    pub fn n_strata(&self) -> usize {
        self.baseline_hazards.len()
    }

    pub fn validate(&self) -> Result<()> {
        if self.n < 2 {
            return Err(Error::param("n", "must be at least 2"));
        }
        if self.beta_true.len() != self.d {
            return Err(Error::DimensionMismatch {
                expected: self.d,
                found: self.beta_true.len(),
            });
        }
        if self.beta_true.iter().any(|b| !b.is_finite()) {
            return Err(Error::param("beta_true", "must be finite"));
        }
        if self.baseline_hazards.is_empty() {
            return Err(Error::param("baseline_hazards", "need at least one stratum"));
        }
        if self.baseline_hazards.iter().any(|h| !(h.is_finite() && *h > 0.0)) {
            return Err(Error::param("baseline_hazards", "must be positive"));
        }
        if let CovariateDesign::Ar1 { rho } = self.covariates {
            check_rho(rho)?;
        }
        if let Censoring::Exponential { rate } = self.censoring {
            check_rate(rate)?;
        }
        if let Some(ix) = &self.interaction {
            if ix.first >= self.d || ix.second >= self.d || !ix.coef.is_finite() {
                return Err(Error::param("interaction", "indices must be < d and coef finite"));
            }
        }
        Ok(())
    }

    /// Regular-signal stratified design: n = 1000, d = 10, β* = ±0.5
    /// alternating, ten strata with hazards log-spaced over [0.5, 2].
    pub fn stratified_default() -> Self {
        let d = 10;
        SimConfig {
            n: 1000,
            d,
            beta_true: (0..d).map(|j| if j % 2 == 0 { 0.5 } else { -0.5 }).collect(),
            covariates: CovariateDesign::IidNormal,
            baseline_hazards: log_spaced(0.5, 2.0, 10),
            censoring: Censoring::None,
            interaction: None,
            seed: 20_211_001,
        }
    }

    /// Low-signal stratified design: a single nonzero coefficient of 0.25.
    pub fn stratified_low_signal() -> Self {
        let mut cfg = Self::stratified_default();
        cfg.beta_true = vec![0.0; cfg.d];
        cfg.beta_true[0] = 0.25;
        cfg
    }

    /// Cross-validation design for one of the four scenarios: n = 400,
    /// d = 20, three unit coefficients, one stratum with unit hazard.
    pub fn cv_scenario(scenario: CvScenario) -> Self {
        let d = 20;
        let mut beta_true = vec![0.0; d];
        beta_true[0] = 1.0;
        beta_true[1] = -1.0;
        beta_true[2] = 1.0;
        let (covariates, interaction) = scenario.design();
        SimConfig {
            n: 400,
            d,
            beta_true,
            covariates,
            baseline_hazards: vec![1.0],
            censoring: Censoring::None,
            interaction,
            seed: 20_211_002,
        }
    }
}

fn log_spaced(lo: f64, hi: f64, k: usize) -> Vec<f64> {
    if k == 1 {
        return vec![lo];
    }
    (0..k)
        .map(|i| (lo.ln() + (hi.ln() - lo.ln()) * i as f64 / (k - 1) as f64).exp())
        .collect()
}

/// AR(1) correlation used by the AR(1) cross-validation scenarios.
pub const SCENARIO_AR1_RHO: f64 = 0.5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CvScenario {
    IidCorrect,
    Ar1Correct,
    IidMisspecified,
    Ar1Misspecified,
}

impl CvScenario {
    pub const ALL: [CvScenario; 4] = [
        CvScenario::IidCorrect,
        CvScenario::Ar1Correct,
        CvScenario::IidMisspecified,
        CvScenario::Ar1Misspecified,
    ];

    fn design(self) -> (CovariateDesign, Option<Interaction>) {
        let ar1 = CovariateDesign::Ar1 {
            rho: SCENARIO_AR1_RHO,
        };
        let ix = Some(Interaction {
            first: 0,
            second: 1,
            coef: 1.0,
        });
        match self {
            CvScenario::IidCorrect => (CovariateDesign::IidNormal, None),
            CvScenario::Ar1Correct => (ar1, None),
            CvScenario::IidMisspecified => (CovariateDesign::IidNormal, ix),
            CvScenario::Ar1Misspecified => (ar1, ix),
        }
    }
}

fn check_rho(rho: f64) -> Result<()> {
    if !(rho > -1.0 && rho < 1.0) {
        return Err(Error::param("rho", format!("must lie in (-1, 1), got {rho}")));
    }
    Ok(())
}

fn check_rate(rate: f64) -> Result<()> {
    if !(rate > 0.0 && rate.is_finite()) {
        return Err(Error::param("censoring rate", format!("must be positive, got {rate}")));
    }
    Ok(())
}

pub fn gen_covariates_with<R: Rng + ?Sized>(
    rng: &mut R,
    n: usize,
    d: usize,
    design: CovariateDesign,
) -> Result<Vec<Vec<f64>>> {
    let rho = match design {
        CovariateDesign::IidNormal => 0.0,
        CovariateDesign::Ar1 { rho } => {
            check_rho(rho)?;
            rho
        }
    };
    let innovation = (1.0 - rho * rho).sqrt();
    Ok((0..n)
        .map(|_| {
            let mut row = Vec::with_capacity(d);
            let mut prev = 0.0;
            for j in 0..d {
                let z: f64 = StandardNormal.sample(rng);
                let x = if j == 0 || rho == 0.0 { z } else { rho * prev + innovation * z };
                row.push(x);
                prev = x;
            }
            row
        })
        .collect())
}

pub fn gen_covariates(n: usize, d: usize, design: CovariateDesign, seed: u64) -> Result<Vec<Vec<f64>>> {
    gen_covariates_with(&mut ChaCha8Rng::seed_from_u64(seed), n, d, design)
}

/// True linear predictor, including the interaction term, clamped to ±[`ETA_CAP`].
pub fn true_linear_predictor(x: &[f64], beta_true: &[f64], interaction: Option<&Interaction>) -> f64 {
    let mut eta: f64 = x.iter().zip(beta_true).map(|(a, b)| a * b).sum();
    if let Some(ix) = interaction {
        eta += ix.coef * x[ix.first] * x[ix.second];
    }
    eta.clamp(-ETA_CAP, ETA_CAP)
}

/// Inverse-transform survival times `T = −ln U / (h₀ₖ · exp η)`; all events.
/// `strata` holds 0-based positions into `baselines`.
pub fn gen_survival_with<R: Rng + ?Sized>(
    rng: &mut R,
    covariates: &[Vec<f64>],
    strata: &[usize],
    beta_true: &[f64],
    baselines: &[f64],
    interaction: Option<&Interaction>,
) -> Result<(Vec<f64>, Vec<bool>)> {
    if covariates.len() != strata.len() {
        return Err(Error::LengthMismatch {
            what: "covariates/strata",
            left: covariates.len(),
            right: strata.len(),
        });
    }
    if baselines.iter().any(|h| !(h.is_finite() && *h > 0.0)) {
        return Err(Error::param("baseline hazard", "must be positive"));
    }
    let mut times = Vec::with_capacity(covariates.len());
    for (x, &k) in covariates.iter().zip(strata) {
        if x.len() != beta_true.len() {
            return Err(Error::DimensionMismatch {
                expected: beta_true.len(),
                found: x.len(),
            });
        }
        let h0 = *baselines
            .get(k)
            .ok_or_else(|| Error::param("strata", format!("position {k} has no baseline")))?;
        let eta = true_linear_predictor(x, beta_true, interaction);
        let u: f64 = Open01.sample(rng);
        times.push(-u.ln() / (h0 * eta.exp()));
    }
    let events = vec![true; times.len()];
    Ok((times, events))
}

pub fn gen_survival(
    covariates: &[Vec<f64>],
    strata: &[usize],
    beta_true: &[f64],
    baselines: &[f64],
    interaction: Option<&Interaction>,
    seed: u64,
) -> Result<(Vec<f64>, Vec<bool>)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    gen_survival_with(&mut rng, covariates, strata, beta_true, baselines, interaction)
}

pub fn apply_censoring_with<R: Rng + ?Sized>(
    rng: &mut R,
    times: &[f64],
    scheme: Censoring,
) -> Result<(Vec<f64>, Vec<bool>)> {
    match scheme {
        Censoring::None => Ok((times.to_vec(), vec![true; times.len()])),
        Censoring::Exponential { rate } => {
            check_rate(rate)?;
            let dist = Exp::new(rate).map_err(|e| Error::param("censoring rate", e.to_string()))?;
            let mut observed = Vec::with_capacity(times.len());
            let mut events = Vec::with_capacity(times.len());
            for &t in times {
                let c: f64 = dist.sample(rng);
                if t <= c {
                    observed.push(t);
                    events.push(true);
                } else {
                    observed.push(c);
                    events.push(false);
                }
            }
            Ok((observed, events))
        }
    }
}

pub fn apply_censoring(times: &[f64], scheme: Censoring, seed: u64) -> Result<(Vec<f64>, Vec<bool>)> {
    apply_censoring_with(&mut ChaCha8Rng::seed_from_u64(seed), times, scheme)
}

/// A simulated data set with the generating strata positions.
#[derive(Debug, Clone)]
pub struct Simulated {
    pub dataset: Dataset,
    pub strata: Vec<usize>,
}

/// Draw one data set. Strata are allocated round-robin so each stratum gets
/// `n / K` subjects (±1); labels are `1..=K`.
pub fn simulate<R: Rng + ?Sized>(rng: &mut R, config: &SimConfig) -> Result<Simulated> {
    config.validate()?;
    let k = config.n_strata();
    let strata: Vec<usize> = (0..config.n).map(|i| i % k).collect();
    let x = gen_covariates_with(rng, config.n, config.d, config.covariates)?;
    let (t, _) = gen_survival_with(
        rng,
        &x,
        &strata,
        &config.beta_true,
        &config.baseline_hazards,
        config.interaction.as_ref(),
    )?;
    let (time, event) = apply_censoring_with(rng, &t, config.censoring)?;
    let observations = x
        .into_iter()
        .zip(time)
        .zip(event)
        .zip(&strata)
        .map(|(((covariates, time), event), &s)| Observation {
            covariates,
            time,
            event,
            stratum: s as i64 + 1,
        })
        .collect();
    Ok(Simulated {
        dataset: Dataset::new(observations)?,
        strata,
    })
}

/// RNG for replication `replication` of a run seeded with `seed`.
pub fn replication_rng(seed: u64, replication: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(replication as u64);
    rng
}

/// Random split with `train_fraction` of every stratum in the training part
/// (at least one subject on each side).
pub fn stratified_split<R: Rng + ?Sized>(
    rng: &mut R,
    dataset: &Dataset,
    train_fraction: f64,
) -> Result<(Vec<usize>, Vec<usize>)> {
    if !(train_fraction > 0.0 && train_fraction < 1.0) {
        return Err(Error::param("train_fraction", "must lie in (0, 1)"));
    }
    let mut train = Vec::new();
    let mut test = Vec::new();
    for k in 0..dataset.n_strata() {
        let mut members = dataset.members_desc(k).to_vec();
        if members.len() < 2 {
            return Err(Error::param(
                "train_fraction",
                format!("stratum {} has fewer than 2 subjects", dataset.strata()[k]),
            ));
        }
        members.sort_unstable();
        members.shuffle(rng);
        let m = members.len();
        let n_train = ((train_fraction * m as f64).round() as usize).clamp(1, m - 1);
        train.extend_from_slice(&members[..n_train]);
        test.extend_from_slice(&members[n_train..]);
    }
    train.sort_unstable();
    test.sort_unstable();
    Ok((train, test))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StratifiedSettings {
    pub train_fraction: f64,
}

impl Default for StratifiedSettings {
    fn default() -> Self {
        StratifiedSettings { train_fraction: 0.7 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CvSettings {
    pub folds: usize,
    pub n_lambda: usize,
    pub min_ratio: f64,
}

impl Default for CvSettings {
    fn default() -> Self {
        CvSettings {
            folds: 5,
            n_lambda: 50,
            min_ratio: 0.05,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ExperimentDesign {
    Stratified(StratifiedSettings),
    Cv(CvSettings),
}

/// Declarative experiment description, read from TOML.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub name: String,
    pub replications: usize,
    pub design: ExperimentDesign,
    pub simulation: SimConfig,
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: ExperimentConfig = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.simulation.validate()?;
        if cfg.replications == 0 {
            return Err(Error::Config("replications must be positive".into()));
        }
        Ok(cfg)
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn run(&self, n_replications: usize) -> Result<ExperimentResult> {
        let mut result = match self.design {
            ExperimentDesign::Stratified(s) => run_stratified_experiment(&self.simulation, &s, n_replications)?,
            ExperimentDesign::Cv(s) => run_cv_experiment(&self.simulation, &s, n_replications)?,
        };
        result.name = self.name.clone();
        Ok(result)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricValue {
    pub metric: String,
    pub value: Option<f64>,
    /// Selected penalty, for cross-validation experiments.
    pub lambda: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReplicationRecord {
    pub replication: usize,
    pub values: Vec<MetricValue>,
    /// Set when the replication failed; `values` is then empty.
    pub error: Option<String>,
    /// Non-fatal notes (non-converged fits and the like).
    pub warnings: Vec<String>,
}

impl ReplicationRecord {
    pub fn value(&self, metric: &str) -> Option<f64> {
        self.values.iter().find(|v| v.metric == metric).and_then(|v| v.value)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SummaryStats {
    pub count: usize,
    pub mean: f64,
    pub sd: f64,
    pub min: f64,
    pub q1: f64,
    pub median: f64,
    pub q3: f64,
    pub max: f64,
}

impl SummaryStats {
    /// `None` for an empty sample. `sd` uses the n − 1 denominator (0 for one value);
    /// quartiles interpolate linearly between order statistics.
    pub fn from_values(values: &[f64]) -> Option<Self> {
        if values.is_empty() {
            return None;
        }
        let mut sorted = values.to_vec();
        sorted.sort_by(f64::total_cmp);
        let n = sorted.len();
        let mean = sorted.iter().sum::<f64>() / n as f64;
        let sd = if n > 1 {
            (sorted.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64).sqrt()
        } else {
            0.0
        };
        let q = |p: f64| {
            let h = (n - 1) as f64 * p;
            let lo = h.floor() as usize;
            let hi = h.ceil() as usize;
            sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
        };
        Some(SummaryStats {
            count: n,
            mean,
            sd,
            min: sorted[0],
            q1: q(0.25),
            median: q(0.5),
            q3: q(0.75),
            max: sorted[n - 1],
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentResult {
    pub name: String,
    pub kind: String,
    pub seed: u64,
    pub replications: Vec<ReplicationRecord>,
    pub summary: BTreeMap<String, SummaryStats>,
    pub n_failed: usize,
}

impl ExperimentResult {
    fn assemble(kind: &str, seed: u64, replications: Vec<ReplicationRecord>) -> Self {
        let mut by_metric: BTreeMap<String, Vec<f64>> = BTreeMap::new();
        for rec in &replications {
            for v in &rec.values {
                let entry = by_metric.entry(v.metric.clone()).or_default();
                if let Some(x) = v.value {
                    entry.push(x);
                }
            }
        }
        let summary = by_metric
            .into_iter()
            .filter_map(|(m, vals)| SummaryStats::from_values(&vals).map(|s| (m, s)))
            .collect();
        let n_failed = replications.iter().filter(|r| r.error.is_some()).count();
        ExperimentResult {
            name: kind.to_string(),
            kind: kind.to_string(),
            seed,
            replications,
            summary,
            n_failed,
        }
    }

    /// Values of `metric` across successful replications, in replication order.
    pub fn series(&self, metric: &str) -> Vec<f64> {
        self.replications.iter().filter_map(|r| r.value(metric)).collect()
    }
}

pub const METRIC_WITHIN_STRATA: &str = "within_strata_cindex";
pub const METRIC_ALL_PAIRS: &str = "all_pairs_cindex";
pub const METRIC_BASELINE_ADJUSTED: &str = "baseline_adjusted_cindex";

fn stratified_replication(
    config: &SimConfig,
    settings: &StratifiedSettings,
    replication: usize,
    options: &FitOptions,
) -> Result<(Vec<MetricValue>, Vec<String>)> {
    let mut rng = replication_rng(config.seed, replication);
    let sim = simulate(&mut rng, config)?;
    let (train_idx, test_idx) = stratified_split(&mut rng, &sim.dataset, settings.train_fraction)?;
    let train = sim.dataset.subset(&train_idx)?;
    let test = sim.dataset.subset(&test_idx)?;
    let fit = fit_cox(&train, options)?;
    let mut warnings = Vec::new();
    if !fit.converged {
        warnings.push(format!("cox fit did not converge after {} iterations", fit.n_iterations));
    }
    let within = cindex_within_strata(&fit.beta, &test)?.index;
    let all_pairs = cindex_linear_predictor(&fit.beta, &test)?.index;
    let adjusted = cindex_baseline_adjusted(&train, &test, &fit.beta)?.index;
    let values = [
        (METRIC_WITHIN_STRATA, within),
        (METRIC_ALL_PAIRS, all_pairs),
        (METRIC_BASELINE_ADJUSTED, adjusted),
    ]
    .into_iter()
    .map(|(metric, value)| MetricValue {
        metric: metric.to_string(),
        value,
        lambda: None,
    })
    .collect();
    Ok((values, warnings))
}

fn collect_replications<F>(n_replications: usize, run: F) -> Vec<ReplicationRecord>
where
    F: Fn(usize) -> Result<(Vec<MetricValue>, Vec<String>)> + Sync,
{
    (0..n_replications)
        .into_par_iter()
        .map(|r| match run(r) {
            Ok((values, warnings)) => ReplicationRecord {
                replication: r,
                values,
                error: None,
                warnings,
            },
            Err(e) => ReplicationRecord {
                replication: r,
                values: Vec::new(),
                error: Some(e.to_string()),
                warnings: Vec::new(),
            },
        })
        .collect()
}

/// Per replication: simulate, split each stratum into train/test, fit the
/// stratified Cox model on train, and compute on test the within-stratum,
/// all-pairs, and baseline-adjusted C-indices.
pub fn run_stratified_experiment(
    config: &SimConfig,
    settings: &StratifiedSettings,
    n_replications: usize,
) -> Result<ExperimentResult> {
    config.validate()?;
    let options = FitOptions::default();
    let records = collect_replications(n_replications, |r| {
        stratified_replication(config, settings, r, &options)
    });
    Ok(ExperimentResult::assemble("stratified", config.seed, records))
}

pub const METRIC_GRID_BEST: &str = "grid_best";
pub const METRIC_NULL_MODEL: &str = "null_model";

fn squared_error(beta: &[f64], truth: &[f64]) -> f64 {
    beta.iter().zip(truth).map(|(b, t)| (b - t).powi(2)).sum()
}

fn cv_replication(
    config: &SimConfig,
    settings: &CvSettings,
    replication: usize,
    options: &FitOptions,
) -> Result<(Vec<MetricValue>, Vec<String>)> {
    let mut rng = replication_rng(config.seed, replication);
    let sim = simulate(&mut rng, config)?;
    let data = &sim.dataset;
    let lambdas = lambda_grid(lambda_max(data)?, settings.n_lambda, settings.min_ratio)?;
    let assignment = kfold_split(data, settings.folds, rng.next_u64())?;
    let grid = cv_grid(data, &assignment, &lambdas, options)?;
    let path = fit_path(data, &lambdas, options)?;
    let mse: Vec<f64> = path.iter().map(|f| squared_error(&f.beta, &config.beta_true)).collect();

    let mut warnings = Vec::new();
    let n_nonconverged = path.iter().filter(|f| !f.converged).count();
    if n_nonconverged > 0 {
        warnings.push(format!("{n_nonconverged} full-data path fits did not converge"));
    }
    for (fold, reason) in &grid.failed_folds {
        warnings.push(format!("fold {fold} failed: {reason}"));
    }

    let mut values: Vec<MetricValue> = CvMetric::ALL
        .iter()
        .map(|&m| {
            let idx = grid.select_index(m);
            MetricValue {
                metric: m.name().to_string(),
                value: idx.map(|i| mse[i]),
                lambda: idx.map(|i| lambdas[i]),
            }
        })
        .collect();
    let best = (0..mse.len()).min_by(|&a, &b| mse[a].total_cmp(&mse[b])).expect("nonempty grid");
    values.push(MetricValue {
        metric: METRIC_GRID_BEST.to_string(),
        value: Some(mse[best]),
        lambda: Some(lambdas[best]),
    });
    values.push(MetricValue {
        metric: METRIC_NULL_MODEL.to_string(),
        value: Some(mse[0]),
        lambda: Some(lambdas[0]),
    });
    Ok((values, warnings))
}

/// Per replication: simulate, build a log-spaced penalty grid from the
/// full-data `λ_max`, cross-validate with all three metrics on one fold
/// assignment, refit on the full data, and record `‖β̂(λ_sel) − β*‖²` for each
/// metric. `beta_true` holds the main effects only, so an interaction term in
/// the generator never enters the error.
pub fn run_cv_experiment(
    config: &SimConfig,
    settings: &CvSettings,
    n_replications: usize,
) -> Result<ExperimentResult> {
    config.validate()?;
    let options = FitOptions::default();
    let records = collect_replications(n_replications, |r| cv_replication(config, settings, r, &options));
    Ok(ExperimentResult::assemble("cv", config.seed, records))
}
