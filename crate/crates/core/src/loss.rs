//! Losses `ℓ(θ, y, x)` with exact gradients and Hessians.
//!
//! | loss        | p          | ℓ                                   |
//! |-------------|------------|-------------------------------------|
//! | mean        | 1          | ½(y − θ)²                           |
//! | quantile(τ) | 1          | ρ_τ(y − θ) = u(τ − 1{u < 0})        |
//! | ols         | d          | ½(y − xᵀθ)²                         |
//! | logistic    | d          | log(1 + e^η) − yη, η = xᵀθ          |
//! | softmax(K)  | d(K − 1)   | log Σ_c e^{z_c} − z_y, z_{K−1} = 0  |
//!
//! Softmax parameters are laid out class-major: `θ[c·d + j]` multiplies
//! covariate `j` in the logit of class `c < K − 1`. The last class is the
//! reference with a zero logit.

use alloc::string::String;
use alloc::sync::Arc;
use alloc::vec;
use alloc::vec::Vec;
use core::fmt;

use crate::data::{Design, Rows};
use crate::error::{Error, Result};
use crate::math::{dot, exp, ln, sigmoid, softplus};

/// A user-supplied twice-differentiable loss.
pub trait SmoothLoss: Send + Sync + fmt::Debug {
    fn name(&self) -> &str;
    /// Parameter dimension.
    fn dim(&self) -> usize;
    fn value(&self, theta: &[f64], y: f64, x: &[f64]) -> f64;
    /// Writes `∇_θ ℓ` into `out` (length `dim`).
    fn gradient(&self, theta: &[f64], y: f64, x: &[f64], out: &mut [f64]);
    /// Writes the row-major `dim × dim` Hessian into `out`.
    fn hessian(&self, theta: &[f64], y: f64, x: &[f64], out: &mut [f64]);
    /// Rejects rows the loss cannot evaluate.
    fn check_rows(&self, _rows: Rows<'_>) -> Result<()> {
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub enum LossModel {
    Mean,
    Quantile { tau: f64 },
    Ols { dim: usize },
    Logistic { dim: usize },
    Softmax { dim: usize, classes: usize },
    Custom(Arc<dyn SmoothLoss>),
}

fn logits(theta: &[f64], x: &[f64], classes: usize, out: &mut [f64]) {
    let d = x.len();
    for c in 0..classes - 1 {
        out[c] = dot(&theta[c * d..(c + 1) * d], x);
    }
    out[classes - 1] = 0.0;
}

/// Turns logits into probabilities in place, returning log-sum-exp.
fn softmax_in_place(z: &mut [f64]) -> f64 {
    let max = z.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut total = 0.0;
    for v in z.iter_mut() {
        *v = exp(*v - max);
        total += *v;
    }
    z.iter_mut().for_each(|v| *v /= total);
    max + ln(total)
}

/// Adds `scale · x xᵀ` to the `(bi, bj)` block of a `p × p` matrix with `d × d` blocks.
fn add_outer_block(acc: &mut [f64], p: usize, bi: usize, bj: usize, x: &[f64], scale: f64) {
    let d = x.len();
    for a in 0..d {
        let row = (bi * d + a) * p + bj * d;
        let xa = scale * x[a];
        for b in 0..d {
            acc[row + b] += xa * x[b];
        }
    }
}

impl LossModel {
    pub fn quantile(tau: f64) -> Result<Self> {
        if !(tau > 0.0 && tau < 1.0) {
            return Err(Error::invalid("tau", alloc::format!("{tau} not in (0, 1)")));
        }
        Ok(LossModel::Quantile { tau })
    }

    pub fn softmax(dim: usize, classes: usize) -> Result<Self> {
        if classes < 2 {
            return Err(Error::invalid("class count", "softmax needs at least 2 classes"));
        }
        if dim == 0 {
            return Err(Error::invalid("covariate dimension", "softmax needs covariates"));
        }
        Ok(LossModel::Softmax { dim, classes })
    }

    pub fn name(&self) -> String {
        match self {
            LossModel::Mean => "mean".into(),
            LossModel::Quantile { tau } => alloc::format!("quantile({tau})"),
            LossModel::Ols { .. } => "ols".into(),
            LossModel::Logistic { .. } => "logistic".into(),
            LossModel::Softmax { classes, .. } => alloc::format!("softmax({classes})"),
            LossModel::Custom(c) => c.name().into(),
        }
    }

    /// Parameter dimension p.
    pub fn dim(&self) -> usize {
        match self {
            LossModel::Mean | LossModel::Quantile { .. } => 1,
            LossModel::Ols { dim } | LossModel::Logistic { dim } => *dim,
            LossModel::Softmax { dim, classes } => dim * (classes - 1),
            LossModel::Custom(c) => c.dim(),
        }
    }

    /// Whether an exact Hessian exists.
    pub fn is_smooth(&self) -> bool {
        !matches!(self, LossModel::Quantile { .. })
    }

    /// Number of classes for classification losses.
    pub fn classes(&self) -> Option<usize> {
        match self {
            LossModel::Logistic { .. } => Some(2),
            LossModel::Softmax { classes, .. } => Some(*classes),
            _ => None,
        }
    }

    /// Covariate width the loss requires, if it reads covariates.
    fn covariate_dim(&self) -> Option<usize> {
        match self {
            LossModel::Ols { dim } | LossModel::Logistic { dim } => Some(*dim),
            LossModel::Softmax { dim, .. } => Some(*dim),
            _ => None,
        }
    }

    pub fn check_rows(&self, rows: Rows<'_>) -> Result<()> {
        if let LossModel::Custom(c) = self {
            return c.check_rows(rows);
        }
        if let Some(d) = self.covariate_dim() {
            if rows.dim() != d {
                return Err(Error::DimensionMismatch {
                    what: "covariate columns",
                    expected: d,
                    found: rows.dim(),
                });
            }
        }
        if let Some(k) = self.classes() {
            for (row, &label) in rows.responses().iter().enumerate() {
                if !crate::math::is_class_index(label, k) {
                    return Err(Error::InvalidClassLabel { row, label, classes: k });
                }
            }
        }
        Ok(())
    }

    pub fn value(&self, theta: &[f64], y: f64, x: &[f64]) -> f64 {
        match self {
            LossModel::Mean => 0.5 * (y - theta[0]) * (y - theta[0]),
            LossModel::Quantile { tau } => {
                let u = y - theta[0];
                if u < 0.0 {
                    u * (tau - 1.0)
                } else {
                    u * tau
                }
            }
            LossModel::Ols { .. } => {
                let r = y - dot(theta, x);
                0.5 * r * r
            }
            LossModel::Logistic { .. } => {
                let eta = dot(theta, x);
                softplus(eta) - y * eta
            }
            LossModel::Softmax { classes, .. } => {
                let mut z = vec![0.0; *classes];
                logits(theta, x, *classes, &mut z);
                let zy = z[y as usize];
                softmax_in_place(&mut z) - zy
            }
            LossModel::Custom(c) => c.value(theta, y, x),
        }
    }

    /// Writes the gradient into `out`; for the quantile loss, the subgradient
    /// `1{y < θ} − τ`.
    pub fn gradient(&self, theta: &[f64], y: f64, x: &[f64], out: &mut [f64]) {
        out.iter_mut().for_each(|v| *v = 0.0);
        let mut scratch = Vec::new();
        self.add_gradient(theta, y, x, 1.0, out, &mut scratch);
    }

    /// Writes the row-major `p × p` Hessian into `out`.
    pub fn hessian(&self, theta: &[f64], y: f64, x: &[f64], out: &mut [f64]) -> Result<()> {
        out.iter_mut().for_each(|v| *v = 0.0);
        let mut scratch = Vec::new();
        self.add_hessian(theta, y, x, 1.0, out, &mut scratch)
    }

    /// Class probabilities `f^c_θ(x)` for classification losses.
    pub fn class_probabilities(&self, theta: &[f64], x: &[f64], out: &mut [f64]) -> Result<()> {
        match self {
            LossModel::Logistic { .. } => {
                let p = sigmoid(dot(theta, x));
                out[0] = 1.0 - p;
                out[1] = p;
                Ok(())
            }
            LossModel::Softmax { classes, .. } => {
                logits(theta, x, *classes, out);
                softmax_in_place(&mut out[..*classes]);
                Ok(())
            }
            _ => Err(Error::UnsupportedLoss {
                loss: self.name(),
                requirement: "a classification loss",
            }),
        }
    }

    /// Adds `scale · ∇ℓ` to `acc`, returning `ℓ`.
    pub(crate) fn add_gradient(
        &self,
        theta: &[f64],
        y: f64,
        x: &[f64],
        scale: f64,
        acc: &mut [f64],
        scratch: &mut Vec<f64>,
    ) -> f64 {
        match self {
            LossModel::Mean => {
                let r = theta[0] - y;
                acc[0] += scale * r;
                0.5 * r * r
            }
            LossModel::Quantile { tau } => {
                let u = y - theta[0];
                acc[0] += scale * (if u < 0.0 { 1.0 } else { 0.0 } - tau);
                if u < 0.0 {
                    u * (tau - 1.0)
                } else {
                    u * tau
                }
            }
            LossModel::Ols { .. } => {
                let r = dot(theta, x) - y;
                acc.iter_mut().zip(x).for_each(|(a, xj)| *a += scale * r * xj);
                0.5 * r * r
            }
            LossModel::Logistic { .. } => {
                let eta = dot(theta, x);
                let r = sigmoid(eta) - y;
                acc.iter_mut().zip(x).for_each(|(a, xj)| *a += scale * r * xj);
                softplus(eta) - y * eta
            }
            LossModel::Softmax { classes, .. } => {
                let k = *classes;
                let d = x.len();
                scratch.resize(k, 0.0);
                logits(theta, x, k, scratch);
                let label = y as usize;
                let zy = scratch[label];
                let lse = softmax_in_place(scratch);
                for c in 0..k - 1 {
                    let r = scratch[c] - if c == label { 1.0 } else { 0.0 };
                    for j in 0..d {
                        acc[c * d + j] += scale * r * x[j];
                    }
                }
                lse - zy
            }
            LossModel::Custom(c) => {
                scratch.resize(acc.len(), 0.0);
                c.gradient(theta, y, x, scratch);
                acc.iter_mut().zip(scratch.iter()).for_each(|(a, g)| *a += scale * g);
                c.value(theta, y, x)
            }
        }
    }

    /// Adds `scale · ∇²ℓ` to the row-major `p × p` accumulator.
    pub(crate) fn add_hessian(
        &self,
        theta: &[f64],
        y: f64,
        x: &[f64],
        scale: f64,
        acc: &mut [f64],
        scratch: &mut Vec<f64>,
    ) -> Result<()> {
        let p = self.dim();
        match self {
            LossModel::Mean => acc[0] += scale,
            LossModel::Quantile { .. } => {
                return Err(Error::UnsupportedLoss {
                    loss: self.name(),
                    requirement: "twice differentiable",
                })
            }
            LossModel::Ols { .. } => add_outer_block(acc, p, 0, 0, x, scale),
            LossModel::Logistic { .. } => {
                let s = sigmoid(dot(theta, x));
                add_outer_block(acc, p, 0, 0, x, scale * s * (1.0 - s));
            }
            LossModel::Softmax { classes, .. } => {
                let k = *classes;
                scratch.resize(k, 0.0);
                logits(theta, x, k, scratch);
                softmax_in_place(scratch);
                for a in 0..k - 1 {
                    for b in 0..k - 1 {
                        let w = if a == b {
                            scratch[a] * (1.0 - scratch[a])
                        } else {
                            -scratch[a] * scratch[b]
                        };
                        add_outer_block(acc, p, a, b, x, scale * w);
                    }
                }
            }
            LossModel::Custom(c) => {
                scratch.resize(p * p, 0.0);
                c.hessian(theta, y, x, scratch);
                acc.iter_mut().zip(scratch.iter()).for_each(|(a, h)| *a += scale * h);
            }
        }
        Ok(())
    }

    /// `Σ wᵢ ℓ(θ, yᵢ, xᵢ)` and, when `grad` is given, its gradient. Rows with
    /// zero weight are skipped. Summation follows design order.
    pub(crate) fn weighted_eval(
        &self,
        design: &Design<'_>,
        weights: &[f64],
        theta: &[f64],
        mut grad: Option<&mut [f64]>,
    ) -> f64 {
        let mut scratch = Vec::new();
        let mut dummy = vec![0.0; self.dim()];
        if let Some(g) = grad.as_deref_mut() {
            g.iter_mut().for_each(|v| *v = 0.0);
        }
        let mut total = 0.0;
        for ((y, x), &w) in design.iter().zip(weights) {
            if w == 0.0 {
                continue;
            }
            let value = match grad.as_deref_mut() {
                Some(g) => self.add_gradient(theta, y, x, w, g, &mut scratch),
                None => self.add_gradient(theta, y, x, w, &mut dummy, &mut scratch),
            };
            total += w * value;
        }
        total
    }
}

/// `Σᵢ wᵢ ℓ(θ, yᵢ, xᵢ) + Σⱼ w*ⱼ ℓ(θ, y*ⱼ, x*ⱼ)` over the design rows.
pub fn weighted_objective(loss: &LossModel, design: &Design<'_>, weights: &[f64], theta: &[f64]) -> Result<f64> {
    if weights.len() != design.len() {
        return Err(Error::DimensionMismatch {
            what: "weight count",
            expected: design.len(),
            found: weights.len(),
        });
    }
    if theta.len() != loss.dim() {
        return Err(Error::DimensionMismatch {
            what: "parameter length",
            expected: loss.dim(),
            found: theta.len(),
        });
    }
    let mut total = 0.0;
    for ((y, x), &w) in design.iter().zip(weights) {
        if w != 0.0 {
            total += w * loss.value(theta, y, x);
        }
    }
    Ok(total)
}
