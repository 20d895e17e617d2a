//! Empirical information matrices and the asymptotic covariance
//! `Σ̂(α) = Ĵ⁻¹ Î Ĵ⁻¹` of the posterior bootstrap.
//!
//! With `γ = α/n`, observed rows `Yᵢ` and base draws `Y*ⱼ`:
//!
//! ```text
//! θ̂ = argmin (1/n) Σ ℓ(θ, Yᵢ) + (γ/m) Σ ℓ(θ, Y*ⱼ)
//! Ĵ = (J̄₁ + γ J̄₂) / (1 + γ)      J̄ = mean Hessian at θ̂
//! Î = (Ī₁ + γ Ī₂) / (1 + γ)      Ī = mean of ∇ℓ ∇ℓᵀ at θ̂
//! ```

use alloc::vec;
use alloc::vec::Vec;

use crate::data::{Design, ImputedDataset, LabeledDataset, Rows};
use crate::erm::{solve_weighted_erm, SolverControls, MAX_CONDITION};
use crate::error::{Error, Result};
use crate::linalg::{matmul, sym_inverse, symmetrize, trace};
use crate::loss::LossModel;

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize))]
pub struct SandwichEstimate {
    /// Row-major `p × p`.
    pub j_hat: Vec<f64>,
    pub i_hat: Vec<f64>,
    pub sigma_hat: Vec<f64>,
    pub dim: usize,
    /// The weighted ERM the matrices were evaluated at.
    pub theta_center: Vec<f64>,
    pub alpha: f64,
    pub gamma: f64,
    /// Condition number of `Ĵ`.
    pub condition: f64,
}

impl SandwichEstimate {
    pub fn trace(&self) -> f64 {
        trace(&self.sigma_hat, self.dim)
    }
}

/// Mean Hessian and mean gradient outer product over `rows` at `theta`.
fn information(loss: &LossModel, rows: Rows<'_>, theta: &[f64]) -> Result<(Vec<f64>, Vec<f64>)> {
    let p = loss.dim();
    let mut j = vec![0.0; p * p];
    let mut i = vec![0.0; p * p];
    let mut g = vec![0.0; p];
    let mut scratch = Vec::new();
    let scale = 1.0 / rows.len() as f64;
    for (y, x) in rows.iter() {
        loss.add_hessian(theta, y, x, scale, &mut j, &mut scratch)?;
        g.iter_mut().for_each(|v| *v = 0.0);
        loss.add_gradient(theta, y, x, 1.0, &mut g, &mut scratch);
        for a in 0..p {
            let ga = scale * g[a];
            for b in 0..p {
                i[a * p + b] += ga * g[b];
            }
        }
    }
    symmetrize(&mut j, p);
    symmetrize(&mut i, p);
    Ok((j, i))
}

/// Evaluates `Σ̂(α)` on the observed data and a sample from the base
/// measure. `base_draws` must carry hard labels and may be `None` when
/// `alpha == 0`.
pub fn empirical_sandwich(
    data: &LabeledDataset,
    base_draws: Option<&ImputedDataset>,
    loss: &LossModel,
    alpha: f64,
    controls: &SolverControls,
) -> Result<SandwichEstimate> {
    if !loss.is_smooth() {
        return Err(Error::UnsupportedLoss {
            loss: loss.name(),
            requirement: "twice differentiable",
        });
    }
    if !(alpha >= 0.0 && alpha.is_finite()) {
        return Err(Error::invalid("alpha", alloc::format!("{alpha}")));
    }
    let n = data.len();
    let p = loss.dim();
    if n < p {
        return Err(Error::invalid(
            "labeled rows",
            alloc::format!("{n} rows for {p} parameters"),
        ));
    }
    let gamma = alpha / n as f64;
    let imaginary = if alpha > 0.0 {
        let draws = base_draws.ok_or_else(|| Error::invalid("base draws", "alpha > 0 requires base draws"))?;
        let rows = draws
            .label_rows()
            .ok_or_else(|| Error::invalid("base draws", "rows need hard labels"))?;
        if rows.dim() != data.dim() {
            return Err(Error::DimensionMismatch {
                what: "base draw covariate columns",
                expected: data.dim(),
                found: rows.dim(),
            });
        }
        Some(rows)
    } else {
        None
    };

    let m = imaginary.map_or(0, |r| r.len());
    let mut weights = vec![1.0 / (n as f64 * (1.0 + gamma)); n];
    weights.resize(n + m, gamma / (m as f64 * (1.0 + gamma)));
    let design = Design::new(data.rows(), imaginary);
    let fit = solve_weighted_erm(loss, &design, &weights, controls)?;
    if !fit.converged {
        return Err(Error::NonConverged {
            failed: 1,
            total: 1,
            allowed: 0,
        });
    }
    let theta = fit.theta;

    let (mut j_hat, mut i_hat) = information(loss, data.rows(), &theta)?;
    if let Some(rows) = imaginary {
        let (j2, i2) = information(loss, rows, &theta)?;
        for k in 0..p * p {
            j_hat[k] = (j_hat[k] + gamma * j2[k]) / (1.0 + gamma);
            i_hat[k] = (i_hat[k] + gamma * i2[k]) / (1.0 + gamma);
        }
    }
    let (j_inv, condition) = sym_inverse(&j_hat, p, MAX_CONDITION)?;
    let mut sigma_hat = matmul(&matmul(&j_inv, &i_hat, p), &j_inv, p);
    symmetrize(&mut sigma_hat, p);
    Ok(SandwichEstimate {
        j_hat,
        i_hat,
        sigma_hat,
        dim: p,
        theta_center: theta,
        alpha,
        gamma,
        condition,
    })
}
