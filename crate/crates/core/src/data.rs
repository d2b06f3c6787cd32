//! Right-censored, stratified survival data.
//!
//! A [`Dataset`] is validated once at construction and is immutable afterwards.
//! It caches, per stratum, the member indices sorted by decreasing time, which
//! is the traversal order every risk-set accumulation in the crate uses.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// External stratum code. Codes are arbitrary integers; internally they are
/// mapped to dense positions `0..n_strata` in sorted label order.
pub type StratumLabel = i64;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Observation {
    pub covariates: Vec<f64>,
    pub time: f64,
    /// `true` when the event was observed, `false` when right-censored.
    pub event: bool,
    pub stratum: StratumLabel,
}

/// A record as read from external input, before validation.
#[derive(Debug, Clone, PartialEq)]
pub struct RawRow {
    pub time: f64,
    pub event: f64,
    pub stratum: Option<StratumLabel>,
    pub covariates: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    observations: Vec<Observation>,
    dim: usize,
    strata: Vec<StratumLabel>,
    stratum_pos: Vec<usize>,
    by_stratum_desc: Vec<Vec<usize>>,
}

/// Validate parsed rows and build a [`Dataset`]. Row numbers in errors are
/// 1-based data rows (the header is not counted).
pub fn validate_dataset(rows: &[RawRow]) -> Result<Dataset> {
    let mut observations = Vec::with_capacity(rows.len());
    let expected = rows.first().map_or(0, |r| r.covariates.len());
    for (i, row) in rows.iter().enumerate() {
        let line = i + 1;
        if !row.time.is_finite() {
            return Err(Error::InvalidRow {
                row: line,
                reason: format!("time {} is not finite", row.time),
            });
        }
        if row.time <= 0.0 {
            return Err(Error::InvalidRow {
                row: line,
                reason: format!("time must be positive, got {}", row.time),
            });
        }
        let event = if row.event == 1.0 {
            true
        } else if row.event == 0.0 {
            false
        } else {
            return Err(Error::InvalidRow {
                row: line,
                reason: format!("event must be 0 or 1, got {}", row.event),
            });
        };
        if row.covariates.len() != expected {
            return Err(Error::RaggedRow {
                row: line,
                expected,
                found: row.covariates.len(),
            });
        }
        if let Some(j) = row.covariates.iter().position(|x| !x.is_finite()) {
            return Err(Error::InvalidRow {
                row: line,
                reason: format!("covariate {} is not finite", j + 1),
            });
        }
        observations.push(Observation {
            covariates: row.covariates.clone(),
            time: row.time,
            event,
            stratum: row.stratum.unwrap_or(1),
        });
    }
    Dataset::new(observations)
}

impl Dataset {
    pub const MIN_OBSERVATIONS: usize = 2;

    pub fn new(observations: Vec<Observation>) -> Result<Self> {
        if observations.len() < Self::MIN_OBSERVATIONS {
            return Err(Error::TooFewObservations {
                min: Self::MIN_OBSERVATIONS,
                found: observations.len(),
            });
        }
        Self::build(observations)
    }

    fn build(observations: Vec<Observation>) -> Result<Self> {
        let dim = observations[0].covariates.len();
        for (i, obs) in observations.iter().enumerate() {
            let row = i + 1;
            if obs.covariates.len() != dim {
                return Err(Error::RaggedRow {
                    row,
                    expected: dim,
                    found: obs.covariates.len(),
                });
            }
            if !(obs.time.is_finite() && obs.time > 0.0) {
                return Err(Error::InvalidRow {
                    row,
                    reason: format!("time must be positive and finite, got {}", obs.time),
                });
            }
            if obs.covariates.iter().any(|x| !x.is_finite()) {
                return Err(Error::InvalidRow {
                    row,
                    reason: "non-finite covariate".into(),
                });
            }
        }

        let mut strata: Vec<StratumLabel> = observations.iter().map(|o| o.stratum).collect();
        strata.sort_unstable();
        strata.dedup();

        let stratum_pos: Vec<usize> = observations
            .iter()
            .map(|o| strata.binary_search(&o.stratum).expect("label registered"))
            .collect();

        let mut by_stratum_desc = vec![Vec::new(); strata.len()];
        for (i, &k) in stratum_pos.iter().enumerate() {
            by_stratum_desc[k].push(i);
        }
        for members in &mut by_stratum_desc {
            // stable: equal times keep input order
            members.sort_by(|&a, &b| observations[b].time.total_cmp(&observations[a].time));
        }

        Ok(Dataset {
            observations,
            dim,
            strata,
            stratum_pos,
            by_stratum_desc,
        })
    }

    /// Sub-dataset with the given observation indices, in the given order.
    /// Subsets of a valid dataset may hold a single observation (a small
    /// cross-validation fold, for instance).
    pub fn subset(&self, indices: &[usize]) -> Result<Dataset> {
        if indices.is_empty() {
            return Err(Error::TooFewObservations { min: 1, found: 0 });
        }
        let observations = indices
            .iter()
            .map(|&i| self.observations[i].clone())
            .collect();
        Self::build(observations)
    }

    pub fn len(&self) -> usize {
        self.observations.len()
    }

    pub fn is_empty(&self) -> bool {
        self.observations.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn observations(&self) -> &[Observation] {
        &self.observations
    }

    pub fn observation(&self, i: usize) -> &Observation {
        &self.observations[i]
    }

    /// Sorted distinct stratum labels.
    pub fn strata(&self) -> &[StratumLabel] {
        &self.strata
    }

    pub fn n_strata(&self) -> usize {
        self.strata.len()
    }

    /// Dense position of observation `i`'s stratum.
    pub fn stratum_position(&self, i: usize) -> usize {
        self.stratum_pos[i]
    }

    pub fn position_of(&self, label: StratumLabel) -> Option<usize> {
        self.strata.binary_search(&label).ok()
    }

    /// Members of the stratum at dense position `k`, sorted by decreasing time.
    pub fn members_desc(&self, k: usize) -> &[usize] {
        &self.by_stratum_desc[k]
    }

    pub fn times(&self) -> Vec<f64> {
        self.observations.iter().map(|o| o.time).collect()
    }

    pub fn events(&self) -> Vec<bool> {
        self.observations.iter().map(|o| o.event).collect()
    }

    pub fn n_events(&self) -> usize {
        self.observations.iter().filter(|o| o.event).count()
    }

    pub fn check_dim(&self, beta: &[f64]) -> Result<()> {
        if beta.len() != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                found: beta.len(),
            });
        }
        Ok(())
    }

    /// `βᵀX_i` for every observation.
    pub fn linear_predictors(&self, beta: &[f64]) -> Result<Vec<f64>> {
        self.check_dim(beta)?;
        Ok(self
            .observations
            .iter()
            .map(|o| dot(&o.covariates, beta))
            .collect())
    }

    /// Indices `j` (0-based) with `S_j = stratum` and `T_j ≥ t`, ascending.
    pub fn risk_set(&self, stratum: StratumLabel, t: f64) -> Result<Vec<usize>> {
        let k = self
            .position_of(stratum)
            .ok_or(Error::UnknownStratum(stratum))?;
        let mut out: Vec<usize> = self.by_stratum_desc[k]
            .iter()
            .copied()
            .take_while(|&j| self.observations[j].time >= t)
            .collect();
        out.sort_unstable();
        Ok(out)
    }
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// An unordered comparable pair, oriented so that `earlier` has the
/// smaller observed time (and is necessarily an event).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct PairComparability {
    pub earlier: usize,
    pub later: usize,
}

/// Orientation of a pair under the censoring rules, or `None` when the pair
/// is not comparable.
///
/// A pair is comparable exactly when the smaller time is strictly smaller and
/// belongs to an observed event. That covers both-events (distinct times),
/// event-before-censoring, and excludes both-censored, censoring-before-event,
/// and every exact time tie.
#[inline]
pub fn orient_pair(t_i: f64, e_i: bool, t_j: f64, e_j: bool) -> Option<bool> {
    if t_i < t_j {
        e_i.then_some(true)
    } else if t_j < t_i {
        e_j.then_some(false)
    } else {
        None
    }
}

pub fn comparable_pairs(times: &[f64], events: &[bool]) -> Result<Vec<PairComparability>> {
    if times.len() != events.len() {
        return Err(Error::LengthMismatch {
            what: "times/events",
            left: times.len(),
            right: events.len(),
        });
    }
    let n = times.len();
    let mut pairs = Vec::new();
    for i in 0..n {
        for j in (i + 1)..n {
            if let Some(i_first) = orient_pair(times[i], events[i], times[j], events[j]) {
                let (earlier, later) = if i_first { (i, j) } else { (j, i) };
                pairs.push(PairComparability { earlier, later });
            }
        }
    }
    Ok(pairs)
}
