//! Breslow cumulative baseline hazards and expected survival times.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::data::{dot, Dataset, StratumLabel};
use crate::error::{Error, Result};

/// Right-continuous nondecreasing step function starting at zero.
///
/// `values[i]` is the level on `[knots[i], knots[i + 1])`.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(try_from = "RawStepFunction")]
pub struct StepFunction {
    knots: Vec<f64>,
    values: Vec<f64>,
}

#[derive(Deserialize)]
struct RawStepFunction {
    knots: Vec<f64>,
    values: Vec<f64>,
}

impl TryFrom<RawStepFunction> for StepFunction {
    type Error = Error;

    fn try_from(raw: RawStepFunction) -> Result<Self> {
        StepFunction::new(raw.knots, raw.values)
    }
}

impl StepFunction {
    pub fn new(knots: Vec<f64>, values: Vec<f64>) -> Result<Self> {
        if knots.len() != values.len() {
            return Err(Error::LengthMismatch {
                what: "knots/values",
                left: knots.len(),
                right: values.len(),
            });
        }
        if knots.iter().any(|k| !(k.is_finite() && *k > 0.0)) {
            return Err(Error::param("knots", "must be positive and finite"));
        }
        if knots.windows(2).any(|w| w[0].partial_cmp(&w[1]) != Some(std::cmp::Ordering::Less)) {
            return Err(Error::param("knots", "must be strictly increasing"));
        }
        if values.iter().any(|v| !(v.is_finite() && *v >= 0.0)) {
            return Err(Error::param("values", "must be nonnegative and finite"));
        }
        if values.windows(2).any(|w| w[0] > w[1]) {
            return Err(Error::param("values", "must be nondecreasing"));
        }
        Ok(StepFunction { knots, values })
    }

    pub fn zero() -> Self {
        StepFunction::default()
    }

    pub fn knots(&self) -> &[f64] {
        &self.knots
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn is_empty(&self) -> bool {
        self.knots.is_empty()
    }

    pub fn eval(&self, t: f64) -> f64 {
        let n = self.knots.partition_point(|&k| k <= t);
        if n == 0 {
            0.0
        } else {
            self.values[n - 1]
        }
    }
}

/// Per-stratum cumulative baseline hazards, keyed by stratum label.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct BaselineSet {
    pub strata: BTreeMap<StratumLabel, StepFunction>,
}

impl BaselineSet {
    pub fn get(&self, label: StratumLabel) -> Option<&StepFunction> {
        self.strata.get(&label)
    }
}

/// Breslow estimate of every stratum's cumulative baseline hazard at `beta`.
///
/// Knots are the distinct event times of the stratum; the increment at a knot
/// is (number of events there) / Σ_{T_j ≥ t} exp(βᵀX_j). A stratum without
/// events gets the zero function.
pub fn breslow_cumhaz(dataset: &Dataset, beta: &[f64]) -> Result<BaselineSet> {
    let eta = dataset.linear_predictors(beta)?;
    let mut strata = BTreeMap::new();
    for (k, &label) in dataset.strata().iter().enumerate() {
        let members = dataset.members_desc(k);
        // walk in decreasing time, collect (time, increment), then accumulate upward
        let mut risk = 0.0;
        let mut increments = Vec::new();
        let mut start = 0;
        while start < members.len() {
            let t = dataset.observation(members[start]).time;
            let mut end = start;
            let mut events = 0usize;
            while end < members.len() && dataset.observation(members[end]).time == t {
                let i = members[end];
                risk += eta[i].exp();
                if dataset.observation(i).event {
                    events += 1;
                }
                end += 1;
            }
            if events > 0 {
                increments.push((t, events as f64 / risk));
            }
            start = end;
        }
        increments.reverse();
        let mut knots = Vec::with_capacity(increments.len());
        let mut values = Vec::with_capacity(increments.len());
        let mut total = 0.0;
        for (t, inc) in increments {
            total += inc;
            knots.push(t);
            values.push(total);
        }
        strata.insert(label, StepFunction { knots, values });
    }
    Ok(BaselineSet { strata })
}

/// Trapezoidal expected survival time under cumulative hazard `h` scaled by
/// `exp(linear_predictor)`, integrated from 0 to the last knot.
pub fn expected_survival(h: &StepFunction, linear_predictor: f64) -> Result<f64> {
    if h.is_empty() {
        return Err(Error::param(
            "baseline",
            "step function has no knots; expected survival is undefined",
        ));
    }
    let risk = linear_predictor.exp();
    let mut total = 0.0;
    let mut prev_t = 0.0;
    let mut prev_s = 1.0;
    for (&t, &v) in h.knots.iter().zip(&h.values) {
        let s = (-risk * v).exp();
        total += 0.5 * (t - prev_t) * (s + prev_s);
        prev_t = t;
        prev_s = s;
    }
    Ok(total)
}

/// What to do with an observation whose stratum has no usable baseline.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum UnseenStratumPolicy {
    #[default]
    Fail,
    Drop,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Predictions {
    pub linear_predictors: Vec<f64>,
    /// `None` for dropped observations.
    pub times: Vec<Option<f64>>,
    pub dropped: Vec<usize>,
}

pub fn predict_with_policy(
    fit_beta: &[f64],
    baselines: &BaselineSet,
    newdata: &Dataset,
    policy: UnseenStratumPolicy,
) -> Result<Predictions> {
    let mut linear_predictors = Vec::with_capacity(newdata.len());
    let mut times = Vec::with_capacity(newdata.len());
    let mut dropped = Vec::new();
    newdata.check_dim(fit_beta)?;
    for (i, obs) in newdata.observations().iter().enumerate() {
        let lp = dot(&obs.covariates, fit_beta);
        linear_predictors.push(lp);
        let predicted = match baselines.get(obs.stratum) {
            Some(h) if !h.is_empty() => Some(expected_survival(h, lp)?),
            Some(_) => match policy {
                UnseenStratumPolicy::Fail => return Err(Error::NoEventsInStratum(obs.stratum)),
                UnseenStratumPolicy::Drop => None,
            },
            None => match policy {
                UnseenStratumPolicy::Fail => return Err(Error::UnknownStratum(obs.stratum)),
                UnseenStratumPolicy::Drop => None,
            },
        };
        if predicted.is_none() {
            dropped.push(i);
        }
        times.push(predicted);
    }
    Ok(Predictions {
        linear_predictors,
        times,
        dropped,
    })
}

/// Expected survival time for every observation in `newdata`; fails on the
/// first observation whose stratum has no baseline or no events.
pub fn predict_times(
    fit_beta: &[f64],
    baselines: &BaselineSet,
    newdata: &Dataset,
) -> Result<Vec<f64>> {
    let p = predict_with_policy(fit_beta, baselines, newdata, UnseenStratumPolicy::Fail)?;
    Ok(p.times.into_iter().map(|t| t.expect("fail policy")).collect())
}
