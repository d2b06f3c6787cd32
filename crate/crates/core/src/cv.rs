//! K-fold cross-validation for choosing the L1 penalty.
//!
//! One fold assignment is shared by every penalty and every metric, so metric
//! comparisons are paired. Three scores are available per penalty:
//!
//! * `deviance`: held-out partial log-likelihood summed over folds (each fold
//!   uses its own risk sets), higher is better;
//! * `within_fold_cindex`: per-fold C-index of `−βᵀX`, averaged over folds;
//! * `baseline_adjusted_cindex`: each held-out subject gets an expected
//!   survival time from its training split's coefficients and Breslow
//!   baselines, and the C-index is taken over all subjects pooled, so pairs
//!   straddling two folds count too.

use std::fmt;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::baseline::{breslow_cumhaz, predict_with_policy, UnseenStratumPolicy};
use crate::concordance::{cindex_from_scores, cindex_linear_predictor, ConcordanceReport};
use crate::cox::{partial_log_likelihood, FitOptions};
use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::lasso::fit_path;

pub const CV_FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FoldAssignment {
    /// 1-based fold label per observation.
    pub folds: Vec<usize>,
    pub k_folds: usize,
    pub seed: u64,
}

impl FoldAssignment {
    /// Observation indices in fold `fold` (1-based).
    pub fn members(&self, fold: usize) -> Vec<usize> {
        (0..self.folds.len()).filter(|&i| self.folds[i] == fold).collect()
    }

    /// Observation indices outside fold `fold`.
    pub fn complement(&self, fold: usize) -> Vec<usize> {
        (0..self.folds.len()).filter(|&i| self.folds[i] != fold).collect()
    }

    pub fn sizes(&self) -> Vec<usize> {
        let mut sizes = vec![0; self.k_folds];
        for &f in &self.folds {
            sizes[f - 1] += 1;
        }
        sizes
    }
}

/// Stratified random fold assignment.
///
/// Within each stratum (in label order) the members are shuffled and dealt
/// round-robin, continuing the deal where the previous stratum stopped. Fold
/// sizes then differ by at most one both overall and within every stratum.
pub fn kfold_split(dataset: &Dataset, k_folds: usize, seed: u64) -> Result<FoldAssignment> {
    if k_folds < 2 {
        return Err(Error::param("k_folds", "must be at least 2"));
    }
    let undersized: Vec<_> = (0..dataset.n_strata())
        .filter(|&k| dataset.members_desc(k).len() < k_folds)
        .map(|k| dataset.strata()[k])
        .collect();
    if !undersized.is_empty() {
        return Err(Error::UndersizedStrata {
            k_folds,
            labels: undersized,
        });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut folds = vec![0; dataset.len()];
    let mut dealt = 0usize;
    for k in 0..dataset.n_strata() {
        let mut members = dataset.members_desc(k).to_vec();
        members.sort_unstable();
        members.shuffle(&mut rng);
        for i in members {
            folds[i] = dealt % k_folds + 1;
            dealt += 1;
        }
    }
    Ok(FoldAssignment {
        folds,
        k_folds,
        seed,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CvMetric {
    Deviance,
    WithinFoldCindex,
    BaselineAdjustedCindex,
}

impl CvMetric {
    pub const ALL: [CvMetric; 3] = [
        CvMetric::Deviance,
        CvMetric::WithinFoldCindex,
        CvMetric::BaselineAdjustedCindex,
    ];

    pub fn name(self) -> &'static str {
        match self {
            CvMetric::Deviance => "deviance",
            CvMetric::WithinFoldCindex => "within_fold_cindex",
            CvMetric::BaselineAdjustedCindex => "baseline_adjusted_cindex",
        }
    }
}

impl fmt::Display for CvMetric {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for CvMetric {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.replace('-', "_").as_str() {
            "deviance" | "partial_likelihood" => Ok(CvMetric::Deviance),
            "within_fold_cindex" | "within_fold" => Ok(CvMetric::WithinFoldCindex),
            "baseline_adjusted_cindex" | "baseline_adjusted" => Ok(CvMetric::BaselineAdjustedCindex),
            other => Err(Error::param("metric", format!("unknown metric {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HeldoutLikelihood {
    pub value: f64,
    /// The validation fold had no events and contributes zero.
    pub no_events: bool,
}

pub fn heldout_partial_likelihood(train_beta: &[f64], validation: &Dataset) -> Result<HeldoutLikelihood> {
    let value = partial_log_likelihood(validation, train_beta)?;
    Ok(HeldoutLikelihood {
        value,
        no_events: validation.n_events() == 0,
    })
}

/// Mean over folds of the within-fold C-index of `−β_foldᵀX`; folds without
/// comparable pairs are skipped. `None` when every fold is undefined.
pub fn cv_within_fold_cindex(fold_betas: &[Vec<f64>], folds: &[Dataset]) -> Result<Option<f64>> {
    if fold_betas.len() != folds.len() {
        return Err(Error::LengthMismatch {
            what: "fold betas/folds",
            left: fold_betas.len(),
            right: folds.len(),
        });
    }
    let mut sum = 0.0;
    let mut used = 0usize;
    for (beta, fold) in fold_betas.iter().zip(folds) {
        if let Some(c) = fold_cindex(beta, fold)? {
            sum += c;
            used += 1;
        }
    }
    Ok((used > 0).then(|| sum / used as f64))
}

fn fold_cindex(beta: &[f64], fold: &Dataset) -> Result<Option<f64>> {
    if fold.len() < 2 {
        fold.check_dim(beta)?;
        return Ok(None);
    }
    Ok(cindex_linear_predictor(beta, fold)?.index)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FoldDiagnostics {
    pub fold: usize,
    pub converged: bool,
    pub kkt_violation: f64,
    pub n_active: usize,
    pub heldout_log_likelihood: f64,
    pub heldout_no_events: bool,
    pub within_fold_cindex: Option<f64>,
    pub n_predicted: usize,
    pub n_excluded: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LambdaScores {
    pub lambda: f64,
    pub deviance: Option<f64>,
    pub within_fold_cindex: Option<f64>,
    pub baseline_adjusted_cindex: Option<f64>,
    pub baseline_adjusted_report: ConcordanceReport,
    /// Observations without a prediction (stratum lacking training events, or a failed fold).
    pub n_excluded: usize,
    pub folds: Vec<FoldDiagnostics>,
}

impl LambdaScores {
    pub fn score(&self, metric: CvMetric) -> Option<f64> {
        match metric {
            CvMetric::Deviance => self.deviance,
            CvMetric::WithinFoldCindex => self.within_fold_cindex,
            CvMetric::BaselineAdjustedCindex => self.baseline_adjusted_cindex,
        }
    }
}

/// All three metrics over a penalty grid, from one set of fold fits.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CvGrid {
    pub k_folds: usize,
    pub seed: u64,
    pub fold_sizes: Vec<usize>,
    /// Sorted decreasing.
    pub lambdas: Vec<f64>,
    pub scores: Vec<LambdaScores>,
    /// Folds whose training fit failed outright, with the reason.
    pub failed_folds: Vec<(usize, String)>,
    /// For each penalty, the predicted expected survival time of every
    /// observation (from the fold that held it out).
    pub predicted_times: Vec<Vec<Option<f64>>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CvResult {
    pub format_version: u32,
    pub metric: CvMetric,
    pub k_folds: usize,
    pub seed: u64,
    pub fold_sizes: Vec<usize>,
    pub lambdas: Vec<f64>,
    pub scores: Vec<Option<f64>>,
    pub selected_lambda: Option<f64>,
    pub selected_index: Option<usize>,
    pub failed_folds: Vec<(usize, String)>,
    pub per_lambda: Vec<LambdaScores>,
}

fn sorted_grid(lambdas: &[f64]) -> Result<Vec<f64>> {
    if lambdas.is_empty() {
        return Err(Error::param("lambdas", "must not be empty"));
    }
    if lambdas.iter().any(|l| !(l.is_finite() && *l >= 0.0)) {
        return Err(Error::param("lambdas", "must be finite and nonnegative"));
    }
    let mut sorted = lambdas.to_vec();
    sorted.sort_by(|a, b| b.total_cmp(a));
    if sorted.windows(2).any(|w| w[0] == w[1]) {
        return Err(Error::param("lambdas", "must be distinct"));
    }
    Ok(sorted)
}

struct FoldOutcome {
    diagnostics: Vec<FoldDiagnostics>,
    /// Per penalty: (observation index, predicted time or None).
    predictions: Vec<Vec<(usize, Option<f64>)>>,
}

fn run_fold(
    dataset: &Dataset,
    assignment: &FoldAssignment,
    fold: usize,
    lambdas: &[f64],
    options: &FitOptions,
) -> Result<FoldOutcome> {
    let held = assignment.members(fold);
    let train = dataset.subset(&assignment.complement(fold))?;
    let validation = dataset.subset(&held)?;
    let fits = fit_path(&train, lambdas, options)?;
    let mut diagnostics = Vec::with_capacity(fits.len());
    let mut predictions = Vec::with_capacity(fits.len());
    for fit in &fits {
        let heldout = heldout_partial_likelihood(&fit.beta, &validation)?;
        let within = fold_cindex(&fit.beta, &validation)?;
        let baselines = breslow_cumhaz(&train, &fit.beta)?;
        let pred = predict_with_policy(&fit.beta, &baselines, &validation, UnseenStratumPolicy::Drop)?;
        diagnostics.push(FoldDiagnostics {
            fold,
            converged: fit.converged,
            kkt_violation: fit.kkt_violation,
            n_active: fit.active_set.len(),
            heldout_log_likelihood: heldout.value,
            heldout_no_events: heldout.no_events,
            within_fold_cindex: within,
            n_predicted: held.len() - pred.dropped.len(),
            n_excluded: pred.dropped.len(),
        });
        predictions.push(held.iter().copied().zip(pred.times).collect());
    }
    Ok(FoldOutcome {
        diagnostics,
        predictions,
    })
}

/// Score every penalty in `lambdas` (any order, distinct, nonnegative) under
/// all three metrics. Fold fits are warm-started along the decreasing grid.
pub fn cv_grid(
    dataset: &Dataset,
    assignment: &FoldAssignment,
    lambdas: &[f64],
    options: &FitOptions,
) -> Result<CvGrid> {
    options.validate()?;
    if assignment.folds.len() != dataset.len() {
        return Err(Error::LengthMismatch {
            what: "fold assignment/dataset",
            left: assignment.folds.len(),
            right: dataset.len(),
        });
    }
    if assignment.folds.iter().any(|&f| f == 0 || f > assignment.k_folds) {
        return Err(Error::param("assignment", "fold label out of range"));
    }
    let grid = sorted_grid(lambdas)?;
    let folds: Vec<usize> = (1..=assignment.k_folds).collect();
    let outcomes: Vec<Result<FoldOutcome>> = folds
        .par_iter()
        .map(|&fold| run_fold(dataset, assignment, fold, &grid, options))
        .collect();

    let n = dataset.len();
    let times = dataset.times();
    let events = dataset.events();
    let mut failed_folds = Vec::new();
    let mut ok = Vec::new();
    for (fold, outcome) in folds.iter().zip(outcomes) {
        match outcome {
            Ok(o) => ok.push(o),
            Err(e) => failed_folds.push((*fold, e.to_string())),
        }
    }

    let mut scores = Vec::with_capacity(grid.len());
    let mut predicted_times = Vec::with_capacity(grid.len());
    for (l, &lambda) in grid.iter().enumerate() {
        let diag: Vec<FoldDiagnostics> = ok.iter().map(|o| o.diagnostics[l].clone()).collect();
        let deviance = (!diag.is_empty()).then(|| diag.iter().map(|d| d.heldout_log_likelihood).sum());
        let defined: Vec<f64> = diag.iter().filter_map(|d| d.within_fold_cindex).collect();
        let within = (!defined.is_empty()).then(|| defined.iter().sum::<f64>() / defined.len() as f64);

        let mut predicted = vec![None; n];
        for o in &ok {
            for &(i, t) in &o.predictions[l] {
                predicted[i] = t;
            }
        }
        let included: Vec<usize> = (0..n).filter(|&i| predicted[i].is_some()).collect();
        let report = if included.len() >= 2 {
            let s: Vec<f64> = included.iter().map(|&i| predicted[i].unwrap()).collect();
            let t: Vec<f64> = included.iter().map(|&i| times[i]).collect();
            let e: Vec<bool> = included.iter().map(|&i| events[i]).collect();
            cindex_from_scores(&s, &t, &e)?
        } else {
            ConcordanceReport::from_counts(0, 0, 0)
        };
        scores.push(LambdaScores {
            lambda,
            deviance,
            within_fold_cindex: within,
            baseline_adjusted_cindex: report.index,
            baseline_adjusted_report: report,
            n_excluded: n - included.len(),
            folds: diag,
        });
        predicted_times.push(predicted);
    }

    Ok(CvGrid {
        k_folds: assignment.k_folds,
        seed: assignment.seed,
        fold_sizes: assignment.sizes(),
        lambdas: grid,
        scores,
        failed_folds,
        predicted_times,
    })
}

impl CvGrid {
    /// Index of the best-scoring penalty; ties go to the larger penalty.
    pub fn select_index(&self, metric: CvMetric) -> Option<usize> {
        let mut best: Option<(usize, f64)> = None;
        for (i, s) in self.scores.iter().enumerate() {
            if let Some(v) = s.score(metric) {
                if best.is_none_or(|(_, b)| v > b) {
                    best = Some((i, v));
                }
            }
        }
        best.map(|(i, _)| i)
    }

    pub fn select(&self, metric: CvMetric) -> CvResult {
        let selected_index = self.select_index(metric);
        CvResult {
            format_version: CV_FORMAT_VERSION,
            metric,
            k_folds: self.k_folds,
            seed: self.seed,
            fold_sizes: self.fold_sizes.clone(),
            lambdas: self.lambdas.clone(),
            scores: self.scores.iter().map(|s| s.score(metric)).collect(),
            selected_lambda: selected_index.map(|i| self.lambdas[i]),
            selected_index,
            failed_folds: self.failed_folds.clone(),
            per_lambda: self.scores.clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BaselineAdjustedCv {
    pub index: Option<f64>,
    pub report: ConcordanceReport,
    pub n_excluded: usize,
    pub nonconverged_folds: Vec<usize>,
    pub failed_folds: Vec<(usize, String)>,
}

/// Pooled baseline-adjusted C-index at a single penalty.
pub fn cv_baseline_adjusted_cindex(
    dataset: &Dataset,
    assignment: &FoldAssignment,
    lambda: f64,
    options: &FitOptions,
) -> Result<BaselineAdjustedCv> {
    let grid = cv_grid(dataset, assignment, &[lambda], options)?;
    let s = &grid.scores[0];
    Ok(BaselineAdjustedCv {
        index: s.baseline_adjusted_cindex,
        report: s.baseline_adjusted_report,
        n_excluded: s.n_excluded,
        nonconverged_folds: s.folds.iter().filter(|d| !d.converged).map(|d| d.fold).collect(),
        failed_folds: grid.failed_folds,
    })
}

pub fn cv_select_lambda(
    dataset: &Dataset,
    k_folds: usize,
    lambdas: &[f64],
    metric: CvMetric,
    seed: u64,
    options: &FitOptions,
) -> Result<CvResult> {
    let assignment = kfold_split(dataset, k_folds, seed)?;
    Ok(cv_grid(dataset, &assignment, lambdas, options)?.select(metric))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::Observation;

    fn data(n: usize, strata: i64) -> Dataset {
        Dataset::new(
            (0..n)
                .map(|i| Observation {
                    covariates: vec![((i * 17) % 13) as f64 / 13.0],
                    time: 1.0 + ((i * 31) % 29) as f64,
                    event: i % 3 != 0,
                    stratum: 1 + (i as i64 % strata),
                })
                .collect(),
        )
        .unwrap()
    }

    #[test]
    fn exact_and_remainder_fold_sizes() {
        let a = kfold_split(&data(10, 1), 5, 1).unwrap();
        assert_eq!(a.sizes(), vec![2; 5]);
        let a = kfold_split(&data(11, 1), 5, 1).unwrap();
        assert_eq!(a.sizes(), vec![3, 2, 2, 2, 2]);
    }

    #[test]
    fn stratified_balance_and_determinism() {
        let ds = data(37, 3);
        let a = kfold_split(&ds, 4, 99).unwrap();
        assert_eq!(a, kfold_split(&ds, 4, 99).unwrap());
        let sizes = a.sizes();
        assert!(sizes.iter().max().unwrap() - sizes.iter().min().unwrap() <= 1);
        for k in 0..ds.n_strata() {
            let mut per = [0; 4];
            for &i in ds.members_desc(k) {
                per[a.folds[i] - 1] += 1;
            }
            assert!(per.iter().max().unwrap() - per.iter().min().unwrap() <= 1);
        }
        assert_ne!(a, kfold_split(&ds, 4, 100).unwrap());
    }

    #[test]
    fn undersized_strata_are_listed() {
        let ds = Dataset::new(
            (0..7)
                .map(|i| Observation {
                    covariates: vec![],
                    time: 1.0 + i as f64,
                    event: true,
                    stratum: if i < 5 { 1 } else { 2 },
                })
                .collect(),
        )
        .unwrap();
        assert_eq!(
            kfold_split(&ds, 3, 0),
            Err(Error::UndersizedStrata {
                k_folds: 3,
                labels: vec![2]
            })
        );
        assert!(kfold_split(&ds, 1, 0).is_err());
    }

    #[test]
    fn metric_names_parse() {
        for m in CvMetric::ALL {
            assert_eq!(m.name().parse::<CvMetric>().unwrap(), m);
        }
        assert_eq!("baseline-adjusted".parse::<CvMetric>().unwrap(), CvMetric::BaselineAdjustedCindex);
        assert!("auc".parse::<CvMetric>().is_err());
    }

    #[test]
    fn within_fold_mean_is_unweighted() {
        let a = Dataset::new(vec![
            Observation { covariates: vec![1.0], time: 1.0, event: true, stratum: 1 },
            Observation { covariates: vec![0.0], time: 2.0, event: true, stratum: 1 },
        ])
        .unwrap();
        let b = Dataset::new(vec![
            Observation { covariates: vec![0.0], time: 1.0, event: true, stratum: 1 },
            Observation { covariates: vec![1.0], time: 2.0, event: true, stratum: 1 },
        ])
        .unwrap();
        let v = cv_within_fold_cindex(&[vec![1.0], vec![1.0]], &[a.clone(), b]).unwrap();
        assert_eq!(v, Some(0.5));
        let v = cv_within_fold_cindex(&[vec![1.0], vec![1.0]], &[a.clone(), a]).unwrap();
        assert_eq!(v, Some(1.0));
    }

    #[test]
    fn tie_goes_to_larger_lambda() {
        let grid = CvGrid {
            k_folds: 2,
            seed: 0,
            fold_sizes: vec![1, 1],
            lambdas: vec![2.0, 1.0, 0.5],
            scores: [0.6, 0.7, 0.7]
                .iter()
                .zip([2.0, 1.0, 0.5])
                .map(|(&s, lambda)| LambdaScores {
                    lambda,
                    deviance: Some(s),
                    within_fold_cindex: None,
                    baseline_adjusted_cindex: Some(0.5),
                    baseline_adjusted_report: ConcordanceReport::default(),
                    n_excluded: 0,
                    folds: vec![],
                })
                .collect(),
            failed_folds: vec![],
            predicted_times: vec![],
        };
        assert_eq!(grid.select(CvMetric::Deviance).selected_lambda, Some(1.0));
        assert_eq!(grid.select(CvMetric::BaselineAdjustedCindex).selected_lambda, Some(2.0));
        assert_eq!(grid.select(CvMetric::WithinFoldCindex).selected_lambda, None);
    }

    #[test]
    fn single_lambda_is_selected() {
        let ds = data(30, 1);
        let r = cv_select_lambda(&ds, 3, &[0.5], CvMetric::BaselineAdjustedCindex, 7, &FitOptions::default())
            .unwrap();
        assert_eq!(r.selected_lambda, Some(0.5));
        assert_eq!(r.scores.len(), 1);
    }
}
