//! Limited-memory BFGS for smooth unconstrained minimization.
//!
//! Two-loop recursion with the usual `sᵀy / yᵀy` initial scaling. The line
//! search backtracks from the unit step until the Armijo condition holds; near
//! the optimum, where objective differences drown in rounding, a step is also
//! accepted when it keeps the value within rounding and cuts the directional
//! derivative (approximate Wolfe).

use alloc::collections::VecDeque;
use alloc::vec;
use alloc::vec::Vec;

use crate::math::{dot, norm};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LbfgsOptions {
    /// Correction pairs kept.
    pub memory: usize,
    pub max_iter: usize,
    /// Stop once `‖∇f‖ ≤ tol · max(1, |f|)`.
    pub tol: f64,
}

impl Default for LbfgsOptions {
    fn default() -> Self {
        LbfgsOptions {
            memory: 10,
            max_iter: 500,
            tol: 1e-8,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LbfgsOutcome {
    pub x: Vec<f64>,
    pub value: f64,
    pub grad_norm: f64,
    pub iterations: usize,
    pub converged: bool,
}

struct Pair {
    s: Vec<f64>,
    y: Vec<f64>,
    rho: f64,
}

fn direction(g: &[f64], history: &VecDeque<Pair>) -> Vec<f64> {
    let mut q: Vec<f64> = g.iter().map(|v| -v).collect();
    let mut alphas = vec![0.0; history.len()];
    for (i, pair) in history.iter().enumerate().rev() {
        let a = pair.rho * dot(&pair.s, &q);
        alphas[i] = a;
        q.iter_mut().zip(&pair.y).for_each(|(qi, yi)| *qi -= a * yi);
    }
    if let Some(last) = history.back() {
        let scale = dot(&last.s, &last.y) / dot(&last.y, &last.y);
        q.iter_mut().for_each(|v| *v *= scale);
    }
    for (i, pair) in history.iter().enumerate() {
        let b = pair.rho * dot(&pair.y, &q);
        q.iter_mut()
            .zip(&pair.s)
            .for_each(|(qi, si)| *qi += (alphas[i] - b) * si);
    }
    q
}

/// Minimizes `f`, which returns the value and writes the gradient into its
/// second argument.
pub fn minimize<F>(mut f: F, x0: Vec<f64>, opts: &LbfgsOptions) -> LbfgsOutcome
where
    F: FnMut(&[f64], &mut [f64]) -> f64,
{
    let n = x0.len();
    let mut x = x0;
    let mut g = vec![0.0; n];
    let mut fx = f(&x, &mut g);
    let mut history: VecDeque<Pair> = VecDeque::with_capacity(opts.memory);
    let mut x_new = vec![0.0; n];
    let mut g_new = vec![0.0; n];
    let mut iterations = 0;

    loop {
        let gnorm = norm(&g);
        if !fx.is_finite() || !gnorm.is_finite() {
            return LbfgsOutcome {
                x,
                value: fx,
                grad_norm: gnorm,
                iterations,
                converged: false,
            };
        }
        if gnorm <= opts.tol * fx.abs().max(1.0) {
            return LbfgsOutcome {
                x,
                value: fx,
                grad_norm: gnorm,
                iterations,
                converged: true,
            };
        }
        if iterations >= opts.max_iter {
            return LbfgsOutcome {
                x,
                value: fx,
                grad_norm: gnorm,
                iterations,
                converged: false,
            };
        }
        iterations += 1;

        let mut d = direction(&g, &history);
        let mut slope = dot(&g, &d);
        if !(slope < 0.0) {
            history.clear();
            d = g.iter().map(|v| -v).collect();
            slope = -gnorm * gnorm;
        }
        let mut step = if history.is_empty() {
            (1.0 / gnorm).min(1.0)
        } else {
            1.0
        };

        let mut accepted = false;
        let mut f_new = fx;
        for _ in 0..60 {
            x_new
                .iter_mut()
                .zip(&x)
                .zip(&d)
                .for_each(|((xn, xi), di)| *xn = xi + step * di);
            f_new = f(&x_new, &mut g_new);
            if f_new.is_finite() {
                let armijo = f_new <= fx + 1e-4 * step * slope;
                let flat = f_new <= fx + 4.0 * f64::EPSILON * fx.abs() && dot(&g_new, &d).abs() <= 0.9 * slope.abs();
                if armijo || flat {
                    accepted = true;
                    break;
                }
                // minimizer of the quadratic through f(0), f'(0), f(step)
                let denom = 2.0 * (f_new - fx - slope * step);
                let trial = if denom > 0.0 {
                    -slope * step * step / denom
                } else {
                    0.5 * step
                };
                step = trial.clamp(0.1 * step, 0.5 * step);
            } else {
                step *= 0.1;
            }
        }
        if !accepted {
            if history.is_empty() {
                return LbfgsOutcome {
                    x,
                    value: fx,
                    grad_norm: gnorm,
                    iterations,
                    converged: false,
                };
            }
            history.clear();
            continue;
        }

        let s: Vec<f64> = x_new.iter().zip(&x).map(|(a, b)| a - b).collect();
        let y: Vec<f64> = g_new.iter().zip(&g).map(|(a, b)| a - b).collect();
        let sy = dot(&s, &y);
        if sy > 1e-12 * norm(&s) * norm(&y) && sy > 0.0 {
            if history.len() == opts.memory {
                history.pop_front();
            }
            history.push_back(Pair { s, y, rho: 1.0 / sy });
        }
        core::mem::swap(&mut x, &mut x_new);
        core::mem::swap(&mut g, &mut g_new);
        fx = f_new;
    }
}
