//! Concordance (C-index) estimators for censored survival data.
//!
//! Scores follow the survival-time orientation: a higher score predicts a
//! longer survival. Exactly tied scores on a comparable pair earn half credit.

use serde::{Deserialize, Serialize};

use crate::baseline::{breslow_cumhaz, predict_times, BaselineSet};
use crate::data::{orient_pair, Dataset, StratumLabel};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct ConcordanceReport {
    pub concordant: u64,
    pub comparable: u64,
    pub score_ties: u64,
    /// `None` when there are no comparable pairs.
    pub index: Option<f64>,
}

impl ConcordanceReport {
    pub fn from_counts(concordant: u64, comparable: u64, score_ties: u64) -> Self {
        let index = (comparable > 0)
            .then(|| (concordant as f64 + 0.5 * score_ties as f64) / comparable as f64);
        ConcordanceReport {
            concordant,
            comparable,
            score_ties,
            index,
        }
    }

    pub fn discordant(&self) -> u64 {
        self.comparable - self.concordant - self.score_ties
    }

    fn merge(self, other: ConcordanceReport) -> Self {
        Self::from_counts(
            self.concordant + other.concordant,
            self.comparable + other.comparable,
            self.score_ties + other.score_ties,
        )
    }
}

fn count_pairs(scores: &[f64], times: &[f64], events: &[bool]) -> ConcordanceReport {
    let n = scores.len();
    let (mut concordant, mut comparable, mut ties) = (0u64, 0u64, 0u64);
    for i in 0..n {
        for j in (i + 1)..n {
            let Some(i_first) = orient_pair(times[i], events[i], times[j], events[j]) else {
                continue;
            };
            let (early, late) = if i_first { (i, j) } else { (j, i) };
            comparable += 1;
            if scores[early] < scores[late] {
                concordant += 1;
            } else if scores[early] == scores[late] {
                ties += 1;
            }
        }
    }
    ConcordanceReport::from_counts(concordant, comparable, ties)
}

fn check_lengths(scores: &[f64], times: &[f64], events: &[bool]) -> Result<()> {
    if scores.len() != times.len() {
        return Err(Error::LengthMismatch {
            what: "scores/times",
            left: scores.len(),
            right: times.len(),
        });
    }
    if times.len() != events.len() {
        return Err(Error::LengthMismatch {
            what: "times/events",
            left: times.len(),
            right: events.len(),
        });
    }
    Ok(())
}

/// Harrell-type C-index of `scores` (higher = longer predicted survival).
pub fn cindex_from_scores(scores: &[f64], times: &[f64], events: &[bool]) -> Result<ConcordanceReport> {
    check_lengths(scores, times, events)?;
    if scores.len() < 2 {
        return Err(Error::TooFewObservations {
            min: 2,
            found: scores.len(),
        });
    }
    Ok(count_pairs(scores, times, events))
}

fn negated_lp(beta: &[f64], dataset: &Dataset) -> Result<Vec<f64>> {
    Ok(dataset
        .linear_predictors(beta)?
        .into_iter()
        .map(|v| -v)
        .collect())
}

/// C-index of `−βᵀX` over all pairs, ignoring strata.
pub fn cindex_linear_predictor(beta: &[f64], dataset: &Dataset) -> Result<ConcordanceReport> {
    let scores = negated_lp(beta, dataset)?;
    cindex_from_scores(&scores, &dataset.times(), &dataset.events())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StratumConcordance {
    pub stratum: StratumLabel,
    pub report: ConcordanceReport,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WithinStrataReport {
    /// Unweighted mean of the per-stratum indices; `None` when no stratum has a comparable pair.
    pub index: Option<f64>,
    /// Counts pooled over strata (pairs never cross strata).
    pub pooled: ConcordanceReport,
    pub per_stratum: Vec<StratumConcordance>,
    /// Strata without any comparable pair, left out of the average.
    pub excluded_strata: Vec<StratumLabel>,
}

/// Per-stratum C-index of `−βᵀX`, averaged over strata with equal weight.
pub fn cindex_within_strata(beta: &[f64], dataset: &Dataset) -> Result<WithinStrataReport> {
    let scores = negated_lp(beta, dataset)?;
    let times = dataset.times();
    let events = dataset.events();
    let mut per_stratum = Vec::with_capacity(dataset.n_strata());
    let mut excluded_strata = Vec::new();
    let mut pooled = ConcordanceReport::from_counts(0, 0, 0);
    let mut sum = 0.0;
    let mut used = 0usize;
    for (k, &label) in dataset.strata().iter().enumerate() {
        let members = dataset.members_desc(k);
        let s: Vec<f64> = members.iter().map(|&i| scores[i]).collect();
        let t: Vec<f64> = members.iter().map(|&i| times[i]).collect();
        let e: Vec<bool> = members.iter().map(|&i| events[i]).collect();
        let report = count_pairs(&s, &t, &e);
        match report.index {
            Some(c) => {
                sum += c;
                used += 1;
            }
            None => excluded_strata.push(label),
        }
        pooled = pooled.merge(report);
        per_stratum.push(StratumConcordance {
            stratum: label,
            report,
        });
    }
    Ok(WithinStrataReport {
        index: (used > 0).then(|| sum / used as f64),
        pooled,
        per_stratum,
        excluded_strata,
    })
}

/// Pair-weighted alternative to [`cindex_within_strata`]: within-stratum pairs
/// pooled into a single ratio.
pub fn cindex_within_strata_pooled(beta: &[f64], dataset: &Dataset) -> Result<ConcordanceReport> {
    Ok(cindex_within_strata(beta, dataset)?.pooled)
}

/// C-index of expected survival times predicted from stored baselines;
/// every comparable test pair counts, across strata.
pub fn cindex_from_baselines(
    fit_beta: &[f64],
    baselines: &BaselineSet,
    test: &Dataset,
) -> Result<ConcordanceReport> {
    let predicted = predict_times(fit_beta, baselines, test)?;
    cindex_from_scores(&predicted, &test.times(), &test.events())
}

/// Baseline-adjusted C-index: Breslow baselines estimated on `train` at
/// `fit_beta`, expected survival predicted for `test`, concordance over all
/// comparable test pairs.
pub fn cindex_baseline_adjusted(
    train: &Dataset,
    test: &Dataset,
    fit_beta: &[f64],
) -> Result<ConcordanceReport> {
    if train.dim() != test.dim() {
        return Err(Error::DimensionMismatch {
            expected: train.dim(),
            found: test.dim(),
        });
    }
    let baselines = breslow_cumhaz(train, fit_beta)?;
    cindex_from_baselines(fit_beta, &baselines, test)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::Observation;

    #[test]
    fn perfect_and_mixed_orderings() {
        let t = [1.0, 2.0, 3.0];
        let e = [true; 3];
        assert_eq!(cindex_from_scores(&[1.0, 2.0, 3.0], &t, &e).unwrap().index, Some(1.0));
        let r = cindex_from_scores(&[3.0, 1.0, 2.0], &t, &e).unwrap();
        assert_eq!((r.concordant, r.comparable, r.score_ties), (1, 3, 0));
        assert_eq!(r.discordant(), 2);
        assert!((r.index.unwrap() - 1.0 / 3.0).abs() < 1e-15);
        let r = cindex_from_scores(&[5.0, 5.0], &[1.0, 2.0], &[true, true]).unwrap();
        assert_eq!(r.index, Some(0.5));
    }

    #[test]
    fn no_comparable_pairs_is_undefined() {
        let r = cindex_from_scores(&[1.0, 2.0], &[1.0, 2.0], &[false, false]).unwrap();
        assert_eq!(r.comparable, 0);
        assert_eq!(r.index, None);
        assert!(cindex_from_scores(&[1.0], &[1.0, 2.0], &[true, true]).is_err());
    }

    fn strat(rows: &[(f64, bool, i64, f64)]) -> Dataset {
        Dataset::new(
            rows.iter()
                .map(|&(time, event, stratum, x)| Observation {
                    covariates: vec![x],
                    time,
                    event,
                    stratum,
                })
                .collect(),
        )
        .unwrap()
    }

    #[test]
    fn strata_average_is_unweighted() {
        // stratum 1: times (1,2), x (1,0) -> one pair, concordant
        // stratum 2: times 1..=5, x increasing with time -> 10 pairs, all discordant
        let mut rows = vec![(1.0, true, 1, 1.0), (2.0, true, 1, 0.0)];
        for i in 0..5 {
            rows.push((1.0 + i as f64, true, 2, i as f64));
        }
        let data = strat(&rows);
        let r = cindex_within_strata(&[1.0], &data).unwrap();
        assert_eq!(r.per_stratum[0].report.index, Some(1.0));
        assert_eq!(r.per_stratum[1].report.comparable, 10);
        assert_eq!(r.per_stratum[1].report.index, Some(0.0));
        assert_eq!(r.index, Some(0.5));
        assert!((r.pooled.index.unwrap() - 1.0 / 11.0).abs() < 1e-15);
    }

    #[test]
    fn strata_without_pairs_are_excluded() {
        let data = strat(&[
            (1.0, true, 1, 1.0),
            (2.0, true, 1, 0.0),
            (1.0, false, 2, 0.0),
            (2.0, false, 2, 0.0),
        ]);
        let r = cindex_within_strata(&[1.0], &data).unwrap();
        assert_eq!(r.excluded_strata, vec![2]);
        assert_eq!(r.index, Some(1.0));
    }

    #[test]
    fn single_stratum_matches_linear_predictor() {
        let data = strat(&[(1.0, true, 4, 0.3), (2.0, false, 4, -0.1), (1.5, true, 4, 0.9), (3.0, true, 4, 0.2)]);
        let a = cindex_within_strata(&[0.7], &data).unwrap();
        let b = cindex_linear_predictor(&[0.7], &data).unwrap();
        assert_eq!(a.index, b.index);
        assert_eq!(cindex_linear_predictor(&[0.0], &data).unwrap().index, Some(0.5));
    }
}
