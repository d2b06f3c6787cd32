//! Stratified Cox partial likelihood, its derivatives, and a damped Newton fitter.
//!
//! Ties among event times use the Breslow convention: every tied event sees the
//! full risk set at the tied time. Risk-set sums are accumulated per stratum in
//! decreasing time order with a running log-sum-exp shift, so `exp(βᵀx)` never
//! overflows.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::data::Dataset;
use crate::error::{Error, Result};

/// Coefficients beyond this magnitude are treated as monotone-likelihood divergence.
pub const DIVERGENCE_GUARD: f64 = 50.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FitOptions {
    pub max_iterations: usize,
    pub gradient_tolerance: f64,
    pub step_halving_limit: usize,
    pub ridge_epsilon: f64,
    /// Cap on full coordinate sweeps for the penalized fitter.
    pub max_sweeps: usize,
}

impl Default for FitOptions {
    fn default() -> Self {
        FitOptions {
            max_iterations: 100,
            gradient_tolerance: 1e-8,
            step_halving_limit: 20,
            ridge_epsilon: 0.0,
            max_sweeps: 10_000,
        }
    }
}

impl FitOptions {
    pub fn validate(&self) -> Result<()> {
        if self.max_iterations == 0 {
            return Err(Error::param("max_iterations", "must be positive"));
        }
        if !(self.gradient_tolerance > 0.0 && self.gradient_tolerance.is_finite()) {
            return Err(Error::param("gradient_tolerance", "must be positive"));
        }
        if self.step_halving_limit == 0 {
            return Err(Error::param("step_halving_limit", "must be positive"));
        }
        if !(self.ridge_epsilon >= 0.0 && self.ridge_epsilon.is_finite()) {
            return Err(Error::param("ridge_epsilon", "must be nonnegative"));
        }
        if self.max_sweeps == 0 {
            return Err(Error::param("max_sweeps", "must be positive"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoxFit {
    pub beta: Vec<f64>,
    pub log_partial_likelihood: f64,
    pub n_iterations: usize,
    pub converged: bool,
    pub final_gradient_norm: f64,
    /// Set when a coefficient ran past [`DIVERGENCE_GUARD`] or the information
    /// matrix vanished while the Newton direction kept pointing outward.
    pub monotone_likelihood: bool,
}

#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
enum Order {
    Value,
    Gradient,
    Hessian,
}

struct Derivatives {
    value: f64,
    gradient: Vec<f64>,
    /// Row-major d×d, only filled for `Order::Hessian`.
    hessian: Vec<f64>,
}

fn evaluate(dataset: &Dataset, beta: &[f64], order: Order) -> Result<Derivatives> {
    let eta = dataset.linear_predictors(beta)?;
    let d = dataset.dim();
    let want_grad = order >= Order::Gradient;
    let want_hess = order == Order::Hessian;

    let mut value = 0.0;
    let mut gradient = vec![0.0; if want_grad { d } else { 0 }];
    let mut hessian = vec![0.0; if want_hess { d * d } else { 0 }];

    let mut s1 = vec![0.0; gradient.len()];
    let mut s2 = vec![0.0; hessian.len()];
    let mut mean = vec![0.0; gradient.len()];

    for k in 0..dataset.n_strata() {
        let members = dataset.members_desc(k);
        let mut shift = f64::NEG_INFINITY;
        let mut s0 = 0.0;
        s1.iter_mut().for_each(|v| *v = 0.0);
        s2.iter_mut().for_each(|v| *v = 0.0);

        let mut start = 0;
        while start < members.len() {
            let t = dataset.observation(members[start]).time;
            let mut end = start;
            while end < members.len() && dataset.observation(members[end]).time == t {
                let j = members[end];
                let e = eta[j];
                if e > shift {
                    if s0 > 0.0 {
                        let r = (shift - e).exp();
                        s0 *= r;
                        s1.iter_mut().for_each(|v| *v *= r);
                        s2.iter_mut().for_each(|v| *v *= r);
                    }
                    shift = e;
                }
                let w = (e - shift).exp();
                s0 += w;
                if want_grad {
                    let x = &dataset.observation(j).covariates;
                    for a in 0..d {
                        s1[a] += w * x[a];
                    }
                    if want_hess {
                        for a in 0..d {
                            let wa = w * x[a];
                            for b in a..d {
                                s2[a * d + b] += wa * x[b];
                            }
                        }
                    }
                }
                end += 1;
            }

            let n_tied_events = members[start..end]
                .iter()
                .filter(|&&i| dataset.observation(i).event)
                .count();
            if n_tied_events > 0 {
                let log_denominator = shift + s0.ln();
                let m = n_tied_events as f64;
                for &i in &members[start..end] {
                    if dataset.observation(i).event {
                        value += eta[i] - log_denominator;
                    }
                }
                if want_grad {
                    for a in 0..d {
                        mean[a] = s1[a] / s0;
                    }
                    for &i in &members[start..end] {
                        let obs = dataset.observation(i);
                        if obs.event {
                            for a in 0..d {
                                gradient[a] += obs.covariates[a] - mean[a];
                            }
                        }
                    }
                    if want_hess {
                        for a in 0..d {
                            for b in a..d {
                                hessian[a * d + b] -= m * (s2[a * d + b] / s0 - mean[a] * mean[b]);
                            }
                        }
                    }
                }
            }
            start = end;
        }
    }

    if want_hess {
        for a in 0..d {
            for b in 0..a {
                hessian[a * d + b] = hessian[b * d + a];
            }
        }
    }

    Ok(Derivatives {
        value,
        gradient,
        hessian,
    })
}

/// Stratified log partial likelihood `Σ_k Σ_{events in k} [βᵀX_i − log Σ_{risk} exp(βᵀX_j)]`.
pub fn partial_log_likelihood(dataset: &Dataset, beta: &[f64]) -> Result<f64> {
    Ok(evaluate(dataset, beta, Order::Value)?.value)
}

pub fn plk_gradient(dataset: &Dataset, beta: &[f64]) -> Result<Vec<f64>> {
    Ok(evaluate(dataset, beta, Order::Gradient)?.gradient)
}

/// Negative sum over events of risk-set weighted covariance matrices.
pub fn plk_hessian(dataset: &Dataset, beta: &[f64]) -> Result<DMatrix<f64>> {
    let d = dataset.dim();
    let h = evaluate(dataset, beta, Order::Hessian)?.hessian;
    Ok(DMatrix::from_row_slice(d, d, &h))
}

pub(crate) fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// Newton direction `δ` solving `(−H) δ = g`. Returns the direction and whether
/// the information matrix had to be regularized.
fn newton_direction(hessian: &[f64], gradient: &[f64], ridge: f64) -> (Vec<f64>, bool) {
    let d = gradient.len();
    let info = DMatrix::from_row_slice(d, d, hessian).map(|v| -v);
    let g = DVector::from_column_slice(gradient);
    if let Some(chol) = info.clone().cholesky() {
        return (chol.solve(&g).iter().copied().collect(), false);
    }
    let scale = (0..d).map(|i| info[(i, i)].abs()).fold(0.0, f64::max).max(1.0);
    let mut eps = if ridge > 0.0 { ridge } else { 1e-10 * scale };
    loop {
        let mut damped = info.clone();
        for i in 0..d {
            damped[(i, i)] += eps;
        }
        if let Some(chol) = damped.cholesky() {
            return (chol.solve(&g).iter().copied().collect(), true);
        }
        eps *= 10.0;
    }
}

/// Maximize the stratified partial likelihood by damped Newton iteration from `β = 0`.
///
/// Convergence requires the gradient norm to be within tolerance *and* a
/// nonsingular information matrix whose Newton step is negligible. Under
/// separation the gradient decays like `e^{-|β|}` while the Newton step stays
/// near one, so a small gradient alone would falsely report convergence.
pub fn fit_cox(dataset: &Dataset, options: &FitOptions) -> Result<CoxFit> {
    options.validate()?;
    if dataset.n_events() == 0 {
        return Err(Error::NoEvents);
    }
    let d = dataset.dim();
    let mut beta = vec![0.0; d];
    let mut current = evaluate(dataset, &beta, Order::Hessian)?;
    let mut converged = false;
    let mut monotone = false;
    let mut iterations = 0;

    while iterations < options.max_iterations {
        if beta.iter().any(|b| b.abs() > DIVERGENCE_GUARD) {
            monotone = true;
            break;
        }
        let (step, regularized) =
            newton_direction(&current.hessian, &current.gradient, options.ridge_epsilon);
        let grad_norm = norm(&current.gradient);
        if grad_norm <= options.gradient_tolerance {
            let beta_scale = 1.0 + beta.iter().fold(0.0_f64, |m, b| m.max(b.abs()));
            let step_max = step.iter().fold(0.0_f64, |m, s| m.max(s.abs()));
            if regularized && options.ridge_epsilon == 0.0 {
                // information vanished: either a degenerate design or beta drifting to infinity
                monotone = beta.iter().any(|b| b.abs() > 1.0);
                break;
            }
            if step_max <= 1e-4 * beta_scale {
                converged = true;
                break;
            }
        }

        iterations += 1;
        let mut scale = 1.0;
        let mut accepted = None;
        let slack = 1e-11 * (1.0 + current.value.abs());
        for _ in 0..=options.step_halving_limit {
            let trial: Vec<f64> = beta.iter().zip(&step).map(|(b, s)| b + scale * s).collect();
            let value = partial_log_likelihood(dataset, &trial)?;
            if value.is_finite() && value >= current.value - slack {
                accepted = Some(trial);
                break;
            }
            scale *= 0.5;
        }
        match accepted {
            Some(next) => {
                beta = next;
                current = evaluate(dataset, &beta, Order::Hessian)?;
            }
            None => break,
        }
    }

    if !converged && !monotone && beta.iter().any(|b| b.abs() > DIVERGENCE_GUARD) {
        monotone = true;
    }
    let final_gradient_norm = norm(&current.gradient);
    Ok(CoxFit {
        beta,
        log_partial_likelihood: current.value,
        n_iterations: iterations,
        converged,
        final_gradient_norm,
        monotone_likelihood: monotone,
    })
}
