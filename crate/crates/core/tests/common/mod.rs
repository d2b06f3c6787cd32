//! Brute-force reference implementations and random fixtures shared by the
//! integration tests. Everything here is written directly from the defining
//! sums, with no sorting, accumulation, or shifting tricks, so that it stays
//! independent of the library code paths it checks.
#![allow(dead_code)]

use coxcindex::{Dataset, Observation};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub struct FixtureSpec {
    pub n: usize,
    pub d: usize,
    pub n_strata: usize,
    pub censor_prob: f64,
    /// Times are rounded to this many distinct values when set, creating ties.
    pub tie_levels: Option<usize>,
}

pub fn random_dataset<R: Rng>(rng: &mut R, spec: &FixtureSpec) -> Dataset {
    let obs = (0..spec.n)
        .map(|_| {
            let covariates: Vec<f64> = (0..spec.d).map(|_| StandardNormal.sample(rng)).collect();
            let mut time: f64 = rng.gen_range(0.05..5.0);
            if let Some(levels) = spec.tie_levels {
                time = (time * levels as f64 / 5.0).ceil().max(1.0);
            }
            Observation {
                covariates,
                time,
                event: rng.gen::<f64>() >= spec.censor_prob,
                stratum: 1 + rng.gen_range(0..spec.n_strata) as i64,
            }
        })
        .collect();
    Dataset::new(obs).unwrap()
}

pub fn random_beta<R: Rng>(rng: &mut R, d: usize, bound: f64) -> Vec<f64> {
    (0..d).map(|_| rng.gen_range(-bound..bound)).collect()
}

pub fn lp(x: &[f64], beta: &[f64]) -> f64 {
    x.iter().zip(beta).map(|(a, b)| a * b).sum()
}

/// Term-by-term stratified partial log-likelihood.
pub fn brute_plk(ds: &Dataset, beta: &[f64]) -> f64 {
    let obs = ds.observations();
    let mut total = 0.0;
    for i in obs {
        if !i.event {
            continue;
        }
        let mut denom = 0.0;
        for j in obs {
            if j.stratum == i.stratum && j.time >= i.time {
                denom += lp(&j.covariates, beta).exp();
            }
        }
        total += lp(&i.covariates, beta) - denom.ln();
    }
    total
}

pub fn fd_gradient(f: impl Fn(&[f64]) -> f64, beta: &[f64], h: f64) -> Vec<f64> {
    (0..beta.len())
        .map(|j| {
            let mut up = beta.to_vec();
            let mut down = beta.to_vec();
            up[j] += h;
            down[j] -= h;
            (f(&up) - f(&down)) / (2.0 * h)
        })
        .collect()
}

/// Central differences of a vector-valued function; row `a` holds ∂g/∂β_a.
pub fn fd_jacobian(g: impl Fn(&[f64]) -> Vec<f64>, beta: &[f64], h: f64) -> Vec<Vec<f64>> {
    (0..beta.len())
        .map(|a| {
            let mut up = beta.to_vec();
            let mut down = beta.to_vec();
            up[a] += h;
            down[a] -= h;
            g(&up)
                .iter()
                .zip(g(&down))
                .map(|(u, d)| (u - d) / (2.0 * h))
                .collect()
        })
        .collect()
}

pub fn max_rel_err(approx: &[f64], exact: &[f64]) -> f64 {
    let scale = exact.iter().fold(1.0_f64, |m, v| m.max(v.abs()));
    approx
        .iter()
        .zip(exact)
        .map(|(a, e)| (a - e).abs())
        .fold(0.0, f64::max)
        / scale
}

/// Explicit four-rule comparability check for an ordered pair (a, b):
/// returns true when a is known to fail strictly before b.
pub fn known_earlier(ta: f64, ea: bool, tb: f64, eb: bool) -> bool {
    let both_events = ea && eb && ta < tb;
    let event_before_censoring = ea && !eb && ta < tb;
    let both_censored = !ea && !eb;
    (both_events || event_before_censoring) && !both_censored
}

/// (concordant, comparable, score ties) over all ordered pairs; scores use the
/// survival orientation (larger = longer).
pub fn brute_counts(scores: &[f64], times: &[f64], events: &[bool]) -> (u64, u64, u64) {
    let n = scores.len();
    let (mut c, mut m, mut t) = (0, 0, 0);
    for a in 0..n {
        for b in 0..n {
            if a == b || !known_earlier(times[a], events[a], times[b], events[b]) {
                continue;
            }
            m += 1;
            if scores[a] < scores[b] {
                c += 1;
            } else if scores[a] == scores[b] {
                t += 1;
            }
        }
    }
    (c, m, t)
}

pub fn brute_index(scores: &[f64], times: &[f64], events: &[bool]) -> Option<f64> {
    let (c, m, t) = brute_counts(scores, times, events);
    (m > 0).then(|| (c as f64 + 0.5 * t as f64) / m as f64)
}

pub fn neg_lp_scores(ds: &Dataset, beta: &[f64]) -> Vec<f64> {
    ds.observations().iter().map(|o| -lp(&o.covariates, beta)).collect()
}

/// Unweighted mean of per-stratum indices, strata without pairs dropped.
pub fn brute_within_strata(ds: &Dataset, beta: &[f64]) -> Option<f64> {
    let obs = ds.observations();
    let mut labels: Vec<i64> = obs.iter().map(|o| o.stratum).collect();
    labels.sort();
    labels.dedup();
    let mut sum = 0.0;
    let mut used = 0;
    for k in labels {
        let (mut c, mut m, mut t) = (0u64, 0u64, 0u64);
        for a in obs {
            for b in obs {
                if a.stratum != k || b.stratum != k {
                    continue;
                }
                if !known_earlier(a.time, a.event, b.time, b.event) {
                    continue;
                }
                m += 1;
                let (sa, sb) = (-lp(&a.covariates, beta), -lp(&b.covariates, beta));
                if sa < sb {
                    c += 1;
                } else if sa == sb {
                    t += 1;
                }
            }
        }
        if m > 0 {
            sum += (c as f64 + 0.5 * t as f64) / m as f64;
            used += 1;
        }
    }
    (used > 0).then(|| sum / used as f64)
}

/// Breslow cumulative hazard of stratum `k` at time `t`, straight from its sum.
pub fn brute_cumhaz(ds: &Dataset, beta: &[f64], k: i64, t: f64) -> f64 {
    let obs = ds.observations();
    let mut total = 0.0;
    for i in obs {
        if i.stratum != k || i.time > t || !i.event {
            continue;
        }
        let denom: f64 = obs
            .iter()
            .filter(|j| j.stratum == k && j.time >= i.time)
            .map(|j| lp(&j.covariates, beta).exp())
            .sum();
        total += 1.0 / denom;
    }
    total
}

/// Trapezoid over the sorted distinct event times of stratum `k`, starting at 0.
pub fn brute_expected_time(train: &Dataset, beta: &[f64], k: i64, linear_predictor: f64) -> f64 {
    let mut knots: Vec<f64> = train
        .observations()
        .iter()
        .filter(|o| o.stratum == k && o.event)
        .map(|o| o.time)
        .collect();
    knots.sort_by(f64::total_cmp);
    knots.dedup();
    let mut grid = vec![0.0];
    grid.extend(knots);
    let surv = |t: f64| {
        let h = if t == 0.0 { 0.0 } else { brute_cumhaz(train, beta, k, t) };
        (-linear_predictor.exp() * h).exp()
    };
    let mut total = 0.0;
    for w in grid.windows(2) {
        total += (w[1] - w[0]) / 2.0 * (surv(w[1]) + surv(w[0]));
    }
    total
}

pub fn brute_baseline_adjusted(train: &Dataset, test: &Dataset, beta: &[f64]) -> Option<f64> {
    let predicted: Vec<f64> = test
        .observations()
        .iter()
        .map(|o| brute_expected_time(train, beta, o.stratum, lp(&o.covariates, beta)))
        .collect();
    brute_index(&predicted, &test.times(), &test.events())
}
