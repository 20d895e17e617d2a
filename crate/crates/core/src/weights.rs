//! Dirichlet weights `(w₁..wₙ, w*₁..w*ₘ) ~ Dir(1,…,1, α/m,…,α/m)`.
//!
//! Sampled as normalized independent gammas: `Vᵢ ~ Exp(1)` for observed rows
//! and `Ṽⱼ ~ Gamma(α/m, 1)` for imaginary rows. The gamma sampler handles
//! shapes far below one through the `Gamma(a + 1) · U^{1/a}` boost.

use alloc::vec::Vec;

use rand::Rng;
use rand_distr::{Distribution, Exp1, Gamma};

use crate::error::{Error, Result};
use crate::math::compensated_sum;

/// Weights over observed rows followed by imaginary rows.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightVector {
    values: Vec<f64>,
    observed: usize,
}

impl WeightVector {
    /// Normalizes nonnegative weights to sum to one.
    pub fn from_parts(observed: &[f64], imaginary: &[f64]) -> Result<Self> {
        let mut values = Vec::with_capacity(observed.len() + imaginary.len());
        values.extend_from_slice(observed);
        values.extend_from_slice(imaginary);
        if let Some(index) = values.iter().position(|v| !v.is_finite() || *v < 0.0) {
            return Err(Error::invalid(
                "weights",
                alloc::format!("entry {index} is negative or non-finite"),
            ));
        }
        let total = compensated_sum(values.iter().copied());
        if total <= 0.0 {
            return Err(Error::ZeroWeights);
        }
        values.iter_mut().for_each(|v| *v /= total);
        Ok(WeightVector {
            values,
            observed: observed.len(),
        })
    }

    pub fn observed(&self) -> &[f64] {
        &self.values[..self.observed]
    }

    pub fn imaginary(&self) -> &[f64] {
        &self.values[self.observed..]
    }

    /// All weights in design order.
    pub fn as_slice(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

/// Draws one Dirichlet weight vector. With `alpha == 0` only the `n`
/// observed weights are drawn (the Bayesian bootstrap) and `m` is ignored.
pub fn sample_weights<R: Rng + ?Sized>(n: usize, m: usize, alpha: f64, rng: &mut R) -> Result<WeightVector> {
    if n == 0 {
        return Err(Error::Empty("observed weights"));
    }
    if !(alpha >= 0.0 && alpha.is_finite()) {
        return Err(Error::invalid("alpha", alloc::format!("{alpha}")));
    }
    if alpha > 0.0 && m == 0 {
        return Err(Error::invalid("truncation size", "alpha > 0 needs m >= 1"));
    }
    let m = if alpha > 0.0 { m } else { 0 };
    let gamma = if m > 0 {
        Some(Gamma::new(alpha / m as f64, 1.0).map_err(|e| Error::invalid("gamma shape", alloc::format!("{e}")))?)
    } else {
        None
    };
    let mut values = Vec::with_capacity(n + m);
    loop {
        values.clear();
        values.extend((0..n).map(|_| -> f64 { Exp1.sample(rng) }));
        if let Some(g) = &gamma {
            values.extend((0..m).map(|_| g.sample(rng)));
        }
        let total = compensated_sum(values.iter().copied());
        if total > 0.0 && total.is_finite() {
            values.iter_mut().for_each(|v| *v /= total);
            return Ok(WeightVector { values, observed: n });
        }
    }
}
