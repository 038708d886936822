//! Levenberg-Marquardt for nonlinear least squares.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// A residual model `e(p)` with Jacobian `de/dp`.
pub trait LeastSquares {
    fn n_params(&self) -> usize;
    fn residuals(&self, params: &[f64]) -> DVector<f64>;
    fn residuals_and_jacobian(&self, params: &[f64]) -> (DVector<f64>, DMatrix<f64>);
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct LmOptions {
    pub max_epochs: usize,
    /// Stop once `|J^T e|_inf` falls below this.
    pub grad_tol: f64,
    pub mu0: f64,
    pub mu_inc: f64,
    pub mu_dec: f64,
    /// Damping above this means no step can reduce the error.
    pub mu_max: f64,
    pub target_mse: Option<f64>,
}

impl Default for LmOptions {
    fn default() -> Self {
        Self { max_epochs: 1000, grad_tol: 1e-7, mu0: 1e-3, mu_inc: 10.0, mu_dec: 0.1, mu_max: 1e10, target_mse: None }
    }
}

impl LmOptions {
    pub fn validate(&self) -> Result<(), String> {
        if !(self.mu0 > 0.0) {
            return Err(format!("mu0 must be positive, got {}", self.mu0));
        }
        if !(self.mu_inc > 1.0) {
            return Err(format!("mu_inc must exceed 1, got {}", self.mu_inc));
        }
        if !(self.mu_dec > 0.0 && self.mu_dec < 1.0) {
            return Err(format!("mu_dec must lie in (0, 1), got {}", self.mu_dec));
        }
        if !(self.grad_tol >= 0.0) {
            return Err(format!("grad_tol must be non-negative, got {}", self.grad_tol));
        }
        if !(self.mu_max > self.mu0) {
            return Err(format!("mu_max must exceed mu0, got {}", self.mu_max));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StopReason {
    GradTol,
    TargetMse,
    MaxEpochs,
    /// Damping overflowed; only produced by callers that keep stalled runs.
    Stall,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub mse: f64,
    pub grad_norm: f64,
    pub mu: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LmResult {
    pub params: Vec<f64>,
    pub initial_mse: f64,
    pub mse: f64,
    pub grad_norm: f64,
    /// One record per accepted step.
    pub history: Vec<EpochRecord>,
    pub stop: StopReason,
}

#[derive(Debug, Error)]
pub enum LmError {
    #[error("training stalled after {} epochs: damping exceeded {mu_max:e} (mse {:e})", .partial.history.len(), .partial.mse)]
    Stall { mu_max: f64, partial: Box<LmResult> },
    #[error("invalid options: {0}")]
    Options(String),
    #[error("parameter count mismatch: expected {expected}, got {got}")]
    Params { expected: usize, got: usize },
    #[error("non-finite residual")]
    NonFinite,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StepOutcome {
    pub params: Vec<f64>,
    pub sse: f64,
    pub accepted: bool,
    pub mu: f64,
}

/// Solves `(J^T J + mu I) delta = J^T e` with Cholesky, retrying with a small
/// diagonal jitter if the factorization fails.
pub fn damped_solve(jtj: &DMatrix<f64>, g: &DVector<f64>, mu: f64) -> DVector<f64> {
    let n = jtj.nrows();
    let mut a = jtj.clone();
    for i in 0..n {
        a[(i, i)] += mu;
    }
    if let Some(ch) = a.clone().cholesky() {
        return ch.solve(g);
    }
    let jitter = 1e-12 * jtj.trace().abs().max(f64::MIN_POSITIVE);
    for i in 0..n {
        a[(i, i)] += jitter;
    }
    match a.clone().cholesky() {
        Some(ch) => ch.solve(g),
        None => a.lu().solve(g).unwrap_or_else(|| DVector::zeros(n)),
    }
}

/// One damped trial: accepted iff the sum of squares decreases.
pub fn lm_step<P: LeastSquares + ?Sized>(
    problem: &P,
    params: &[f64],
    sse: f64,
    jtj: &DMatrix<f64>,
    g: &DVector<f64>,
    mu: f64,
    opts: &LmOptions,
) -> StepOutcome {
    let delta = damped_solve(jtj, g, mu);
    let cand: Vec<f64> = params.iter().zip(delta.iter()).map(|(p, d)| p - d).collect();
    let e = problem.residuals(&cand);
    let new_sse = e.norm_squared();
    if new_sse.is_finite() && new_sse < sse {
        StepOutcome { params: cand, sse: new_sse, accepted: true, mu: (mu * opts.mu_dec).max(1e-300) }
    } else {
        StepOutcome { params: params.to_vec(), sse, accepted: false, mu: mu * opts.mu_inc }
    }
}

/// Iterates accepted steps until a stopping rule fires. `on_epoch` sees each
/// accepted epoch as it happens.
pub fn lm_minimize<P: LeastSquares + ?Sized>(
    problem: &P,
    initial: &[f64],
    opts: &LmOptions,
    mut on_epoch: impl FnMut(&EpochRecord),
) -> Result<LmResult, LmError> {
    opts.validate().map_err(LmError::Options)?;
    if initial.len() != problem.n_params() {
        return Err(LmError::Params { expected: problem.n_params(), got: initial.len() });
    }
    let mut params = initial.to_vec();
    let (mut e, mut jac) = problem.residuals_and_jacobian(&params);
    let n_res = e.len().max(1) as f64;
    let mut sse = e.norm_squared();
    if !sse.is_finite() {
        return Err(LmError::NonFinite);
    }
    let initial_mse = sse / n_res;
    let mut mu = opts.mu0;
    let mut history = Vec::new();
    loop {
        let g = jac.transpose() * &e;
        let grad_norm = g.amax();
        let mse = sse / n_res;
        let stop = if grad_norm < opts.grad_tol {
            Some(StopReason::GradTol)
        } else if opts.target_mse.is_some_and(|t| mse <= t) {
            Some(StopReason::TargetMse)
        } else if history.len() >= opts.max_epochs {
            Some(StopReason::MaxEpochs)
        } else {
            None
        };
        if let Some(stop) = stop {
            return Ok(LmResult { params, initial_mse, mse, grad_norm, history, stop });
        }
        let jt = jac.transpose();
        let jtj = &jt * &jac;
        loop {
            let out = lm_step(problem, &params, sse, &jtj, &g, mu, opts);
            mu = out.mu;
            if out.accepted {
                params = out.params;
                sse = out.sse;
                break;
            }
            if mu > opts.mu_max {
                let partial = LmResult { params, initial_mse, mse, grad_norm, history, stop: StopReason::MaxEpochs };
                return Err(LmError::Stall { mu_max: opts.mu_max, partial: Box::new(partial) });
            }
        }
        (e, jac) = problem.residuals_and_jacobian(&params);
        let rec = EpochRecord { epoch: history.len() + 1, mse: sse / n_res, grad_norm: (jac.transpose() * &e).amax(), mu };
        on_epoch(&rec);
        history.push(rec);
    }
}
