//! L1-penalized Cox regression by cyclic coordinate descent.
//!
//! Each coordinate update maximizes a one-dimensional quadratic expansion of
//! the partial log-likelihood (exact gradient, exact diagonal Hessian entry at
//! the current iterate) plus the L1 term, which is a soft-threshold step. The
//! step is backtracked until the penalized objective does not decrease. The
//! penalty multiplies the raw (unscaled) log partial likelihood, so sensible
//! values of `lambda` grow with the number of events.

use serde::{Deserialize, Serialize};

use crate::cox::{partial_log_likelihood, plk_gradient, FitOptions};
use crate::data::Dataset;
use crate::error::{Error, Result};

/// Sweeps stop once no coordinate moves by more than this.
pub const COORDINATE_TOLERANCE: f64 = 1e-7;

/// KKT tolerance for a fit at penalty `lambda`.
pub fn kkt_tolerance(lambda: f64) -> f64 {
    1e-6 * (1.0 + lambda)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LassoFit {
    pub beta: Vec<f64>,
    pub lambda: f64,
    pub active_set: Vec<usize>,
    pub converged: bool,
    pub kkt_violation: f64,
    pub n_sweeps: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LambdaPath {
    pub lambdas: Vec<f64>,
    pub fits: Vec<LassoFit>,
}

#[inline]
pub fn soft_threshold(z: f64, gamma: f64) -> f64 {
    debug_assert!(gamma >= 0.0);
    if z > gamma {
        z - gamma
    } else if z < -gamma {
        z + gamma
    } else {
        0.0
    }
}

/// Smallest penalty whose solution is identically zero: `max_j |∂ℓ/∂β_j (0)|`.
pub fn lambda_max(dataset: &Dataset) -> Result<f64> {
    if dataset.n_events() == 0 {
        return Err(Error::NoEvents);
    }
    let g = plk_gradient(dataset, &vec![0.0; dataset.dim()])?;
    Ok(g.iter().fold(0.0, |m, v| m.max(v.abs())))
}

/// Largest KKT residual of `beta` for the penalized problem at `lambda`.
pub fn kkt_violation(gradient: &[f64], beta: &[f64], lambda: f64) -> f64 {
    gradient
        .iter()
        .zip(beta)
        .map(|(&g, &b)| {
            if b != 0.0 {
                (g - lambda * b.signum()).abs()
            } else {
                (g.abs() - lambda).max(0.0)
            }
        })
        .fold(0.0, f64::max)
}

pub fn penalized_objective(dataset: &Dataset, beta: &[f64], lambda: f64) -> Result<f64> {
    let l1: f64 = beta.iter().map(|b| b.abs()).sum();
    Ok(partial_log_likelihood(dataset, beta)? - lambda * l1)
}

/// Per-coordinate working state: the linear predictor is kept in sync with
/// `beta` so that a coordinate update costs O(n).
struct Workspace<'a> {
    data: &'a Dataset,
    beta: Vec<f64>,
    eta: Vec<f64>,
    weights: Vec<f64>,
}

impl<'a> Workspace<'a> {
    fn new(data: &'a Dataset, beta: Vec<f64>) -> Result<Self> {
        let eta = data.linear_predictors(&beta)?;
        let n = eta.len();
        Ok(Workspace {
            data,
            beta,
            eta,
            weights: vec![0.0; n],
        })
    }

    /// Refresh `exp(η − max_k η)` with a per-stratum shift.
    fn refresh_weights(&mut self) {
        for k in 0..self.data.n_strata() {
            let members = self.data.members_desc(k);
            let shift = members
                .iter()
                .map(|&i| self.eta[i])
                .fold(f64::NEG_INFINITY, f64::max);
            for &i in members {
                self.weights[i] = (self.eta[i] - shift).exp();
            }
        }
    }

    /// Log-likelihood at the current `eta`. Uses the weights refreshed for it.
    fn log_likelihood(&self) -> f64 {
        let data = self.data;
        let mut value = 0.0;
        for k in 0..data.n_strata() {
            let members = data.members_desc(k);
            let shift = members
                .iter()
                .map(|&i| self.eta[i])
                .fold(f64::NEG_INFINITY, f64::max);
            let mut s0 = 0.0;
            let mut start = 0;
            while start < members.len() {
                let t = data.observation(members[start]).time;
                let mut end = start;
                while end < members.len() && data.observation(members[end]).time == t {
                    s0 += self.weights[members[end]];
                    end += 1;
                }
                let log_den = shift + s0.ln();
                for &i in &members[start..end] {
                    if data.observation(i).event {
                        value += self.eta[i] - log_den;
                    }
                }
                start = end;
            }
        }
        value
    }

    /// Gradient and negated Hessian diagonal for coordinate `j`.
    fn coordinate_derivatives(&self, j: usize) -> (f64, f64) {
        let data = self.data;
        let mut grad = 0.0;
        let mut curv = 0.0;
        for k in 0..data.n_strata() {
            let members = data.members_desc(k);
            let (mut s0, mut s1, mut s2) = (0.0, 0.0, 0.0);
            let mut start = 0;
            while start < members.len() {
                let t = data.observation(members[start]).time;
                let mut end = start;
                while end < members.len() && data.observation(members[end]).time == t {
                    let i = members[end];
                    let w = self.weights[i];
                    let x = data.observation(i).covariates[j];
                    s0 += w;
                    s1 += w * x;
                    s2 += w * x * x;
                    end += 1;
                }
                let mut events = 0usize;
                for &i in &members[start..end] {
                    let obs = data.observation(i);
                    if obs.event {
                        events += 1;
                        grad += obs.covariates[j];
                    }
                }
                if events > 0 {
                    let mean = s1 / s0;
                    let m = events as f64;
                    grad -= m * mean;
                    curv += m * (s2 / s0 - mean * mean).max(0.0);
                }
                start = end;
            }
        }
        (grad, curv)
    }

    fn shift_coordinate(&mut self, j: usize, delta: f64) {
        self.beta[j] += delta;
        for (i, obs) in self.data.observations().iter().enumerate() {
            self.eta[i] += delta * obs.covariates[j];
        }
        self.refresh_weights();
    }
}

/// Fit the L1-penalized Cox model at a single `lambda`.
pub fn fit_lasso_cox(
    dataset: &Dataset,
    lambda: f64,
    warm_start: Option<&[f64]>,
    options: &FitOptions,
) -> Result<LassoFit> {
    options.validate()?;
    if !(lambda >= 0.0 && lambda.is_finite()) {
        return Err(Error::param("lambda", format!("must be nonnegative, got {lambda}")));
    }
    if dataset.n_events() == 0 {
        return Err(Error::NoEvents);
    }
    let d = dataset.dim();
    let null_gradient = plk_gradient(dataset, &vec![0.0; d])?;
    if null_gradient.iter().all(|g| g.abs() <= lambda) {
        // zero satisfies the optimality conditions, so it is the solution
        return Ok(LassoFit {
            beta: vec![0.0; d],
            lambda,
            active_set: Vec::new(),
            converged: true,
            kkt_violation: 0.0,
            n_sweeps: 0,
        });
    }
    let start = match warm_start {
        Some(w) => {
            dataset.check_dim(w)?;
            w.to_vec()
        }
        None => vec![0.0; d],
    };

    let mut ws = Workspace::new(dataset, start)?;
    ws.refresh_weights();
    let mut loglik = ws.log_likelihood();
    let tol = kkt_tolerance(lambda);
    let mut converged = false;
    let mut kkt = f64::INFINITY;
    let mut sweeps = 0;

    while sweeps < options.max_sweeps {
        sweeps += 1;
        if sweeps > 1 {
            // resync the incrementally updated linear predictor
            ws.eta = dataset.linear_predictors(&ws.beta)?;
            ws.refresh_weights();
            loglik = ws.log_likelihood();
        }
        let mut max_change: f64 = 0.0;
        for j in 0..d {
            let (grad, curv) = ws.coordinate_derivatives(j);
            let old = ws.beta[j];
            if curv <= f64::MIN_POSITIVE {
                // flat coordinate: only the penalty is informative
                if old != 0.0 && grad.abs() <= lambda {
                    let before = loglik - lambda * old.abs();
                    ws.shift_coordinate(j, -old);
                    let after_ll = ws.log_likelihood();
                    if after_ll >= before - 1e-12 * (1.0 + before.abs()) {
                        loglik = after_ll;
                        max_change = max_change.max(old.abs());
                    } else {
                        ws.shift_coordinate(j, old);
                    }
                }
                continue;
            }
            let target = soft_threshold(curv * old + grad, lambda) / curv;
            let mut delta = target - old;
            if delta == 0.0 {
                continue;
            }
            let before = loglik - lambda * old.abs();
            let slack = 1e-13 * (1.0 + before.abs());
            let mut accepted = false;
            for _ in 0..40 {
                ws.shift_coordinate(j, delta);
                let ll = ws.log_likelihood();
                if ll - lambda * ws.beta[j].abs() >= before - slack {
                    loglik = ll;
                    accepted = true;
                    break;
                }
                ws.shift_coordinate(j, -delta);
                // restore exactly: avoid drift from the add/subtract round trip
                ws.beta[j] = old;
                delta *= 0.5;
            }
            if accepted {
                max_change = max_change.max(delta.abs());
            } else {
                ws.eta = dataset.linear_predictors(&ws.beta)?;
                ws.refresh_weights();
                loglik = ws.log_likelihood();
            }
        }

        if max_change < COORDINATE_TOLERANCE {
            let gradient = plk_gradient(dataset, &ws.beta)?;
            kkt = kkt_violation(&gradient, &ws.beta, lambda);
            if kkt <= tol {
                converged = true;
                break;
            }
            if max_change == 0.0 {
                // no coordinate can move any further in floating point
                break;
            }
        }
    }

    if !converged {
        let gradient = plk_gradient(dataset, &ws.beta)?;
        kkt = kkt_violation(&gradient, &ws.beta, lambda);
    }
    let beta = ws.beta;
    let active_set = (0..d).filter(|&j| beta[j] != 0.0).collect();
    Ok(LassoFit {
        beta,
        lambda,
        active_set,
        converged,
        kkt_violation: kkt,
        n_sweeps: sweeps,
    })
}

/// Log-spaced grid from `lambda_max` down to `min_ratio · lambda_max`.
pub fn lambda_grid(lambda_max: f64, n_lambda: usize, min_ratio: f64) -> Result<Vec<f64>> {
    if n_lambda < 2 {
        return Err(Error::param("n_lambda", "must be at least 2"));
    }
    if !(min_ratio > 0.0 && min_ratio < 1.0) {
        return Err(Error::param("min_ratio", "must lie in (0, 1)"));
    }
    if !(lambda_max > 0.0 && lambda_max.is_finite()) {
        return Err(Error::param("lambda_max", "must be positive"));
    }
    let last = n_lambda - 1;
    let log_ratio = min_ratio.ln();
    Ok((0..n_lambda)
        .map(|i| match i {
            0 => lambda_max,
            i if i == last => lambda_max * min_ratio,
            i => lambda_max * (log_ratio * i as f64 / last as f64).exp(),
        })
        .collect())
}

/// Fit a strictly decreasing sequence of penalties, warm-starting each fit
/// from the previous solution.
pub fn fit_path(dataset: &Dataset, lambdas: &[f64], options: &FitOptions) -> Result<Vec<LassoFit>> {
    if lambdas.windows(2).any(|w| w[0].partial_cmp(&w[1]) != Some(std::cmp::Ordering::Greater)) {
        return Err(Error::param("lambdas", "must be strictly decreasing"));
    }
    let mut fits: Vec<LassoFit> = Vec::with_capacity(lambdas.len());
    for &lambda in lambdas {
        let warm = fits.last().map(|f| f.beta.as_slice());
        fits.push(fit_lasso_cox(dataset, lambda, warm, options)?);
    }
    Ok(fits)
}

pub fn lambda_path(
    dataset: &Dataset,
    n_lambda: usize,
    min_ratio: f64,
    options: &FitOptions,
) -> Result<LambdaPath> {
    let lambdas = lambda_grid(lambda_max(dataset)?, n_lambda, min_ratio)?;
    let fits = fit_path(dataset, &lambdas, options)?;
    Ok(LambdaPath { lambdas, fits })
}
