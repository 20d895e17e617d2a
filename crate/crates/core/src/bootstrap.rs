//! The posterior bootstrap and summaries of its draws.
//!
//! Draw `t` solves
//!
//! ```text
//! θ⁽ᵗ⁾ = argmin_θ Σᵢ wᵢ ℓ(θ, Yᵢ, Xᵢ) + Σⱼ w*ⱼ ℓ(θ, Y*ⱼ, X*ⱼ)
//! ```
//!
//! with `(w, w*) ~ Dir(1,…,1, α/m,…,α/m)` and fresh imaginary rows from the
//! base measure. Everything random in draw `t` comes from stream `t` of the
//! master seed, so the draws do not depend on the [`TaskRunner`].

use alloc::boxed::Box;
use alloc::vec;
use alloc::vec::Vec;

use crate::base_measure::BaseMeasure;
use crate::data::{Design, LabeledDataset, Rows, RunConfig};
use crate::erm::{solve_weighted_erm_from, ErmSolution, SolverControls};
use crate::error::{Error, Result};
use crate::loss::LossModel;
use crate::math::{floor, mean, quantile_sorted, sqrt, variance};
use crate::rng::{stream, DOMAIN_BOOTSTRAP};
use crate::weights::sample_weights;

/// Executes independent tasks `0..tasks` and returns their results in task
/// order.
pub trait TaskRunner: Sync {
    fn run<T, F>(&self, tasks: usize, f: F) -> Vec<T>
    where
        T: Send,
        F: Fn(usize) -> T + Sync;
}

/// Runs tasks one after another on the calling thread.
#[derive(Debug, Clone, Copy, Default)]
pub struct Serial;

impl TaskRunner for Serial {
    fn run<T, F>(&self, tasks: usize, f: F) -> Vec<T>
    where
        T: Send,
        F: Fn(usize) -> T + Sync,
    {
        (0..tasks).map(f).collect()
    }
}

/// A `B × p` matrix of posterior draws with per-draw convergence flags.
#[derive(Debug, Clone, PartialEq)]
pub struct PosteriorDraws {
    values: Vec<f64>,
    dim: usize,
    converged: Vec<bool>,
    config: Option<RunConfig>,
}

impl PosteriorDraws {
    /// Wraps draws produced elsewhere (e.g. read back from disk).
    pub fn from_matrix(values: Vec<f64>, dim: usize, converged: Vec<bool>) -> Result<Self> {
        if dim == 0 || values.len() != converged.len() * dim {
            return Err(Error::DimensionMismatch {
                what: "draw matrix entries",
                expected: converged.len() * dim,
                found: values.len(),
            });
        }
        if converged.is_empty() {
            return Err(Error::Empty("posterior draws"));
        }
        if let Some(index) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite {
                what: "posterior draws",
                index,
            });
        }
        Ok(PosteriorDraws {
            values,
            dim,
            converged,
            config: None,
        })
    }

    /// Number of draws B.
    pub fn len(&self) -> usize {
        self.converged.len()
    }

    pub fn is_empty(&self) -> bool {
        self.converged.is_empty()
    }

    /// Parameter dimension p.
    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn draw(&self, t: usize) -> &[f64] {
        &self.values[t * self.dim..(t + 1) * self.dim]
    }

    pub fn iter(&self) -> impl Iterator<Item = &[f64]> + '_ {
        self.values.chunks_exact(self.dim)
    }

    /// Row-major draw matrix.
    pub fn as_slice(&self) -> &[f64] {
        &self.values
    }

    pub fn converged(&self) -> &[bool] {
        &self.converged
    }

    pub fn nonconverged(&self) -> usize {
        self.converged.iter().filter(|c| !**c).count()
    }

    /// The configuration of the run that produced these draws, if known.
    pub fn config(&self) -> Option<&RunConfig> {
        self.config.as_ref()
    }

    pub fn seed(&self) -> Option<u64> {
        self.config.as_ref().map(|c| c.seed)
    }

    pub fn column(&self, j: usize) -> Vec<f64> {
        self.iter().map(|row| row[j]).collect()
    }

    pub fn mean(&self, j: usize) -> f64 {
        mean(&self.column(j))
    }

    /// Sample standard deviation (divisor B − 1; zero when B = 1).
    pub fn sd(&self, j: usize) -> f64 {
        if self.len() < 2 {
            return 0.0;
        }
        sqrt(variance(&self.column(j)))
    }
}

fn check_base(data: &LabeledDataset, base: &BaseMeasure, loss: &LossModel) -> Result<()> {
    if base.dim() != data.dim() {
        return Err(Error::DimensionMismatch {
            what: "base measure covariate columns",
            expected: data.dim(),
            found: base.dim(),
        });
    }
    if let BaseMeasure::Atomic(a) = base {
        if let Some(rows) = a.atoms().label_rows() {
            loss.check_rows(rows)?;
        }
    }
    Ok(())
}

/// Unweighted ERM on the observed rows, used as the starting point of every
/// iterative solve.
fn warm_start(data: &LabeledDataset, loss: &LossModel, controls: &SolverControls) -> Result<Option<Vec<f64>>> {
    if matches!(
        loss,
        LossModel::Mean | LossModel::Quantile { .. } | LossModel::Ols { .. }
    ) {
        return Ok(None);
    }
    let weights = vec![1.0 / data.len() as f64; data.len()];
    let fit = solve_weighted_erm_from(loss, &Design::new(data.rows(), None), &weights, controls, None)?;
    Ok(if fit.converged && fit.theta.iter().all(|v| v.is_finite()) {
        Some(fit.theta)
    } else {
        None
    })
}

fn one_draw(
    t: usize,
    data: &LabeledDataset,
    base: Option<&BaseMeasure>,
    loss: &LossModel,
    config: &RunConfig,
    controls: &SolverControls,
    start: Option<&[f64]>,
) -> Result<ErmSolution> {
    let mut rng = stream(config.seed, DOMAIN_BOOTSTRAP, t as u64);
    let n = data.len();
    let mut labels = Vec::new();
    let mut covariates = Vec::new();
    let (imaginary, m): (Option<Rows<'_>>, usize) = match base {
        Some(base) if config.alpha > 0.0 => match base {
            BaseMeasure::Atomic(a) => {
                let rows = a.atoms().label_rows().expect("atomic base has labels");
                (Some(rows), rows.len())
            }
            BaseMeasure::Predictive(p) => {
                p.sample_into(config.truncation, &mut rng, &mut labels, &mut covariates);
                let rows = Rows::new(&labels, &covariates, p.rows().dim())?;
                (Some(rows), config.truncation)
            }
        },
        _ => (None, 0),
    };
    let weights = sample_weights(n, m, config.alpha, &mut rng)?;
    let design = Design::new(data.rows(), imaginary);
    let fit = solve_weighted_erm_from(loss, &design, weights.as_slice(), controls, start)?;
    if let Some(index) = fit.theta.iter().position(|v| !v.is_finite()) {
        return Err(Error::NonFinite {
            what: "posterior draw",
            index,
        });
    }
    Ok(fit)
}

/// Runs `config.draws` iterations of the posterior bootstrap.
///
/// `base` may be `None` only when `config.alpha == 0`. Non-converged solves
/// are kept and flagged; the run fails once more than
/// `⌊max_nonconverged_fraction · B⌋` of them occur.
pub fn run_posterior_bootstrap<R: TaskRunner>(
    data: &LabeledDataset,
    base: Option<&BaseMeasure>,
    loss: &LossModel,
    config: &RunConfig,
    runner: &R,
) -> Result<PosteriorDraws> {
    config.validate()?;
    loss.check_rows(data.rows())?;
    if config.alpha > 0.0 {
        match base {
            Some(b) => check_base(data, b, loss)?,
            None => return Err(Error::invalid("base measure", "alpha > 0 requires a base measure")),
        }
    }
    let controls = SolverControls::from(config);
    let start = warm_start(data, loss, &controls)?;
    let results = runner.run(config.draws, |t| {
        one_draw(t, data, base, loss, config, &controls, start.as_deref())
    });

    let p = loss.dim();
    let mut values = Vec::with_capacity(config.draws * p);
    let mut converged = Vec::with_capacity(config.draws);
    for (index, result) in results.into_iter().enumerate() {
        let fit = result.map_err(|e| Error::Draw {
            index,
            source: Box::new(e),
        })?;
        values.extend_from_slice(&fit.theta);
        converged.push(fit.converged);
    }
    let failed = converged.iter().filter(|c| !**c).count();
    let allowed = floor(config.max_nonconverged_fraction * config.draws as f64) as usize;
    if failed > allowed {
        return Err(Error::NonConverged {
            failed,
            total: config.draws,
            allowed,
        });
    }
    Ok(PosteriorDraws {
        values,
        dim: p,
        converged,
        config: Some(config.clone()),
    })
}

/// Equal-tailed credible interval: the `(1 − level)/2` and `(1 + level)/2`
/// quantiles of one coordinate, interpolating linearly between order
/// statistics at position `q(B − 1)`.
pub fn credible_interval(draws: &PosteriorDraws, coordinate: usize, level: f64) -> Result<(f64, f64)> {
    if !(level > 0.0 && level < 1.0) {
        return Err(Error::invalid("level", alloc::format!("{level} not in (0, 1)")));
    }
    if draws.len() < 20 {
        return Err(Error::invalid(
            "draw count",
            alloc::format!("{} draws, intervals need at least 20", draws.len()),
        ));
    }
    if coordinate >= draws.dim() {
        return Err(Error::invalid(
            "coordinate",
            alloc::format!("{coordinate} out of range for dimension {}", draws.dim()),
        ));
    }
    let mut column = draws.column(coordinate);
    column.sort_by(f64::total_cmp);
    Ok((
        quantile_sorted(&column, (1.0 - level) / 2.0),
        quantile_sorted(&column, (1.0 + level) / 2.0),
    ))
}

/// Posterior-averaged class probabilities `(1/B) Σₜ f^c_{θ⁽ᵗ⁾}(x)`.
pub fn posterior_predictive_probs(draws: &PosteriorDraws, loss: &LossModel, x: &[f64]) -> Result<Vec<f64>> {
    let (k, d) = match loss {
        LossModel::Softmax { dim, classes } => (*classes, *dim),
        LossModel::Logistic { dim } => (2, *dim),
        _ => {
            return Err(Error::UnsupportedLoss {
                loss: loss.name(),
                requirement: "a classification loss",
            })
        }
    };
    if x.len() != d {
        return Err(Error::DimensionMismatch {
            what: "covariates of the new point",
            expected: d,
            found: x.len(),
        });
    }
    if draws.dim() != loss.dim() {
        return Err(Error::DimensionMismatch {
            what: "draw columns",
            expected: loss.dim(),
            found: draws.dim(),
        });
    }
    let mut avg = vec![0.0; k];
    let mut probs = vec![0.0; k];
    for theta in draws.iter() {
        loss.class_probabilities(theta, x, &mut probs)?;
        avg.iter_mut().zip(&probs).for_each(|(a, p)| *a += p);
    }
    let b = draws.len() as f64;
    avg.iter_mut().for_each(|a| *a /= b);
    Ok(avg)
}

/// Majority-vote class: the argmax of [`posterior_predictive_probs`], ties
/// going to the lowest class index.
pub fn majority_vote_predict(draws: &PosteriorDraws, loss: &LossModel, x: &[f64]) -> Result<usize> {
    Ok(argmax(&posterior_predictive_probs(draws, loss, x)?))
}

/// Index of the largest entry, first one on ties.
pub fn argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in values.iter().enumerate().skip(1) {
        if v > values[best] {
            best = i;
        }
    }
    best
}
