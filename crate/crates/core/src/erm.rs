//! Weighted empirical risk minimization `argmin_θ Σ wᵢ ℓ(θ, yᵢ, xᵢ)`.
//!
//! Mean and quantile losses have exact solutions (weighted average, weighted
//! order statistic), least squares goes through the normal equations, and
//! everything else is handed to L-BFGS, with a few damped Newton steps when
//! L-BFGS stalls short of the gradient tolerance.

use alloc::vec;
use alloc::vec::Vec;

use crate::data::{Design, RunConfig};
use crate::error::{Error, Result};
use crate::lbfgs::{self, LbfgsOptions};
use crate::linalg::{cholesky, cholesky_solve, sym_eigen, symmetrize, trace};
use crate::loss::LossModel;
use crate::math::norm;

/// Condition number above which a weighted normal-equation matrix is
/// treated as rank deficient.
pub const MAX_CONDITION: f64 = 1e12;

/// Relative ridge penalty used when least squares is rank deficient.
pub const RIDGE_SCALE: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverControls {
    pub max_iter: usize,
    pub tol: f64,
    /// L-BFGS memory.
    pub memory: usize,
}

impl Default for SolverControls {
    fn default() -> Self {
        SolverControls {
            max_iter: 500,
            tol: 1e-8,
            memory: 10,
        }
    }
}

impl From<&RunConfig> for SolverControls {
    fn from(cfg: &RunConfig) -> Self {
        SolverControls {
            max_iter: cfg.max_iter,
            tol: cfg.tol,
            ..Default::default()
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize))]
pub struct ErmSolution {
    pub theta: Vec<f64>,
    pub objective: f64,
    pub converged: bool,
    pub iterations: usize,
    /// Set when least squares fell back to a ridge penalty.
    pub regularized: bool,
}

fn check_weights(weights: &[f64], expected: usize) -> Result<()> {
    if weights.len() != expected {
        return Err(Error::DimensionMismatch {
            what: "weight count",
            expected,
            found: weights.len(),
        });
    }
    if let Some(i) = weights.iter().position(|w| !w.is_finite() || *w < 0.0) {
        return Err(Error::invalid(
            "weights",
            alloc::format!("entry {i} is negative or non-finite"),
        ));
    }
    if !weights.iter().any(|&w| w > 0.0) {
        return Err(Error::ZeroWeights);
    }
    Ok(())
}

/// Smallest `v` whose cumulative weight reaches `tau` of the total.
pub fn weighted_quantile(values: &[f64], weights: &[f64], tau: f64) -> Result<f64> {
    check_weights(weights, values.len())?;
    let mut pairs: Vec<(f64, f64)> = values
        .iter()
        .zip(weights)
        .filter(|(_, &w)| w > 0.0)
        .map(|(&v, &w)| (v, w))
        .collect();
    pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
    let total: f64 = pairs.iter().map(|p| p.1).sum();
    // absorb rounding in the running sum so that exact ties resolve downward
    let target = tau * total - 4.0 * f64::EPSILON * total * pairs.len() as f64;
    let mut acc = 0.0;
    for &(v, w) in &pairs {
        acc += w;
        if acc >= target {
            return Ok(v);
        }
    }
    Ok(pairs[pairs.len() - 1].0)
}

fn weighted_least_squares(design: &Design<'_>, weights: &[f64], p: usize) -> Result<(Vec<f64>, bool)> {
    let mut a = vec![0.0; p * p];
    let mut b = vec![0.0; p];
    for ((y, x), &w) in design.iter().zip(weights) {
        if w == 0.0 {
            continue;
        }
        for i in 0..p {
            let wx = w * x[i];
            b[i] += wx * y;
            for j in 0..p {
                a[i * p + j] += wx * x[j];
            }
        }
    }
    let eig = sym_eigen(&a, p);
    if eig.condition_number() <= MAX_CONDITION {
        if let Some(l) = cholesky(&a, p) {
            return Ok((cholesky_solve(&l, p, &b), false));
        }
    }
    let tr = trace(&a, p);
    if !(tr > 0.0) {
        return Err(Error::Singular {
            condition: f64::INFINITY,
        });
    }
    let lambda = RIDGE_SCALE * tr / p as f64;
    for i in 0..p {
        a[i * p + i] += lambda;
    }
    let l = cholesky(&a, p).ok_or(Error::Singular {
        condition: eig.condition_number(),
    })?;
    Ok((cholesky_solve(&l, p, &b), true))
}

/// Solves from the zero vector (or the closed form).
pub fn solve_weighted_erm(
    loss: &LossModel,
    design: &Design<'_>,
    weights: &[f64],
    controls: &SolverControls,
) -> Result<ErmSolution> {
    solve_weighted_erm_from(loss, design, weights, controls, None)
}

/// As [`solve_weighted_erm`], starting iterative solvers at `start`.
pub fn solve_weighted_erm_from(
    loss: &LossModel,
    design: &Design<'_>,
    weights: &[f64],
    controls: &SolverControls,
    start: Option<&[f64]>,
) -> Result<ErmSolution> {
    check_weights(weights, design.len())?;
    loss.check_rows(design.observed())?;
    if let Some(imag) = design.imaginary() {
        loss.check_rows(imag)?;
    }
    let p = loss.dim();
    let closed = |theta: Vec<f64>, regularized: bool| {
        let objective = loss.weighted_eval(design, weights, &theta, None);
        Ok(ErmSolution {
            theta,
            objective,
            converged: true,
            iterations: 0,
            regularized,
        })
    };
    match loss {
        LossModel::Mean => {
            // centred on one observation so constant data come back exactly
            let pivot = design.iter().next().map_or(0.0, |(y, _)| y);
            let (mut num, mut den) = (0.0, 0.0);
            for ((y, _), &w) in design.iter().zip(weights) {
                num += w * (y - pivot);
                den += w;
            }
            closed(vec![pivot + num / den], false)
        }
        LossModel::Quantile { tau } => {
            let ys: Vec<f64> = design.iter().map(|(y, _)| y).collect();
            closed(vec![weighted_quantile(&ys, weights, *tau)?], false)
        }
        LossModel::Ols { .. } => {
            let (theta, regularized) = weighted_least_squares(design, weights, p)?;
            closed(theta, regularized)
        }
        _ => {
            let x0 = match start {
                Some(s) if s.len() == p => s.to_vec(),
                Some(s) => {
                    return Err(Error::DimensionMismatch {
                        what: "start vector",
                        expected: p,
                        found: s.len(),
                    })
                }
                None => vec![0.0; p],
            };
            let opts = LbfgsOptions {
                memory: controls.memory,
                max_iter: controls.max_iter,
                tol: controls.tol,
            };
            let out = lbfgs::minimize(
                |theta, grad| loss.weighted_eval(design, weights, theta, Some(grad)),
                x0,
                &opts,
            );
            let mut solution = ErmSolution {
                theta: out.x,
                objective: out.value,
                converged: out.converged,
                iterations: out.iterations,
                regularized: false,
            };
            if !solution.converged && out.value.is_finite() {
                newton_polish(loss, design, weights, controls.tol, &mut solution);
            }
            Ok(solution)
        }
    }
}

const NEWTON_STEPS: usize = 20;

/// Damped Newton iterations from `sol.theta`, accepting a step when it lowers
/// the gradient norm. Only runs when the first Newton step is within
/// `sqrt(tol)` of the start (relative), so unbounded problems stay unconverged.
fn newton_polish(loss: &LossModel, design: &Design<'_>, weights: &[f64], tol: f64, sol: &mut ErmSolution) {
    let p = loss.dim();
    let mut scratch = Vec::new();
    let mut g = vec![0.0; p];
    let mut g_new = vec![0.0; p];
    let mut f = loss.weighted_eval(design, weights, &sol.theta, Some(&mut g));
    for _ in 0..NEWTON_STEPS {
        let gnorm = norm(&g);
        if gnorm <= tol * f.abs().max(1.0) {
            sol.converged = true;
            break;
        }
        let mut h = vec![0.0; p * p];
        for ((y, x), &w) in design.iter().zip(weights) {
            if w > 0.0 && loss.add_hessian(&sol.theta, y, x, w, &mut h, &mut scratch).is_err() {
                return;
            }
        }
        symmetrize(&mut h, p);
        let Some(l) = cholesky(&h, p) else { return };
        let neg: Vec<f64> = g.iter().map(|v| -v).collect();
        let d = cholesky_solve(&l, p, &neg);
        if norm(&d) > libm::sqrt(tol) * norm(&sol.theta).max(1.0) {
            break;
        }
        let mut step = 1.0;
        let mut moved = false;
        for _ in 0..30 {
            let trial: Vec<f64> = sol.theta.iter().zip(&d).map(|(t, di)| t + step * di).collect();
            let f_new = loss.weighted_eval(design, weights, &trial, Some(&mut g_new));
            if f_new.is_finite() && norm(&g_new) < gnorm {
                sol.theta = trial;
                f = f_new;
                core::mem::swap(&mut g, &mut g_new);
                moved = true;
                break;
            }
            step *= 0.5;
        }
        sol.iterations += 1;
        if !moved {
            break;
        }
    }
    sol.objective = f;
    if !sol.converged {
        sol.converged = norm(&g) <= tol * f.abs().max(1.0);
    }
}
