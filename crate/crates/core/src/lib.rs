//! Cox proportional-hazards regression with baseline-adjusted concordance.
//!
//! The crate fits plain, stratified, and L1-penalized Cox models, estimates
//! per-stratum Breslow baselines, turns them into expected survival times, and
//! evaluates fits with four C-index estimators. The baseline-adjusted C-index
//! ranks subjects by predicted expected survival, which makes pairs from
//! different strata (or different cross-validation folds) comparable.
//!
//! ```
//! use coxcindex::{cindex_baseline_adjusted, fit_cox, Dataset, FitOptions, Observation};
//!
//! let obs = |t: f64, x: f64, s: i64| Observation { covariates: vec![x], time: t, event: true, stratum: s };
//! let train = Dataset::new(vec![obs(1.0, 1.2, 1), obs(2.0, 0.1, 1), obs(3.5, -0.4, 1),
//!                               obs(0.5, 0.3, 2), obs(0.8, -0.2, 2), obs(1.1, -1.0, 2)])?;
//! let test = Dataset::new(vec![obs(1.5, 0.9, 1), obs(0.7, 0.0, 2), obs(2.5, -0.6, 1)])?;
//! let fit = fit_cox(&train, &FitOptions::default())?;
//! let report = cindex_baseline_adjusted(&train, &test, &fit.beta)?;
//! assert!(report.index.is_some());
//! # Ok::<(), coxcindex::Error>(())
//! ```

pub mod baseline;
pub mod concordance;
pub mod cox;
pub mod cv;
pub mod data;
pub mod error;
pub mod lasso;
pub mod simulation;

pub use baseline::{
    breslow_cumhaz, expected_survival, predict_times, predict_with_policy, BaselineSet, Predictions,
    StepFunction, UnseenStratumPolicy,
};
pub use concordance::{
    cindex_baseline_adjusted, cindex_from_baselines, cindex_from_scores, cindex_linear_predictor,
    cindex_within_strata, cindex_within_strata_pooled, ConcordanceReport, WithinStrataReport,
};
pub use cox::{fit_cox, partial_log_likelihood, plk_gradient, plk_hessian, CoxFit, FitOptions};
pub use cv::{
    cv_baseline_adjusted_cindex, cv_grid, cv_select_lambda, cv_within_fold_cindex,
    heldout_partial_likelihood, kfold_split, CvGrid, CvMetric, CvResult, FoldAssignment,
};
pub use data::{comparable_pairs, validate_dataset, Dataset, Observation, PairComparability, RawRow, StratumLabel};
pub use error::{Error, Result};
pub use lasso::{fit_lasso_cox, lambda_max, lambda_path, soft_threshold, LambdaPath, LassoFit};
pub use simulation::{
    run_cv_experiment, run_stratified_experiment, CovariateDesign, Censoring, CvScenario,
    ExperimentConfig, ExperimentResult, SimConfig,
};
