//! Choosing the concentration parameter α.
//!
//! Two procedures:
//!
//! * coverage: for each α on a grid, compare the posterior credible interval
//!   with the spread of ERMs over empirical resamples of the labeled data and
//!   keep the largest α whose estimated coverage reaches the level;
//! * PPI matching: solve `tr Σ̂(α) / (n + α) = v_PPI` by bisection, where
//!   `v_PPI` is the variance of the prediction-powered mean estimator.

use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use rand::Rng;

use crate::base_measure::BaseMeasure;
use crate::bootstrap::{credible_interval, run_posterior_bootstrap, TaskRunner};
use crate::data::{Design, ImputedDataset, LabeledDataset, RunConfig};
use crate::erm::{solve_weighted_erm_from, SolverControls};
use crate::error::{Error, Result};
use crate::loss::LossModel;
use crate::math::variance;
use crate::rng::{stream, DOMAIN_BASE_SAMPLE, DOMAIN_RESAMPLE};
use crate::sandwich::empirical_sandwich;

/// Which sample size divides which variance in the PPI target.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "kebab-case"))]
pub enum PpiConvention {
    /// `σ²_f / N + σ²_rect / n`: imputed variance over the unlabeled count,
    /// rectifier variance over the labeled count.
    #[default]
    Standard,
    /// `σ²_f / n + σ²_rect / N`.
    Swapped,
}

/// Variance of the prediction-powered estimator of a mean.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize))]
pub struct PpiVariance {
    /// Unbiased variance of the imputed predictions.
    pub sigma2_f: f64,
    /// Unbiased variance of the rectifier `f(Xᵢ) − Yᵢ`.
    pub sigma2_rect: f64,
    /// Labeled count.
    pub n: usize,
    /// Imputed count.
    pub big_n: usize,
    pub convention: PpiConvention,
    pub total: f64,
}

pub fn ppi_variance_mean(labeled_y: &[f64], predictions_on_labeled: &[f64], imputed: &[f64]) -> Result<PpiVariance> {
    ppi_variance_mean_with(labeled_y, predictions_on_labeled, imputed, PpiConvention::Standard)
}

pub fn ppi_variance_mean_with(
    labeled_y: &[f64],
    predictions_on_labeled: &[f64],
    imputed: &[f64],
    convention: PpiConvention,
) -> Result<PpiVariance> {
    if labeled_y.len() != predictions_on_labeled.len() {
        return Err(Error::DimensionMismatch {
            what: "predictions on labeled rows",
            expected: labeled_y.len(),
            found: predictions_on_labeled.len(),
        });
    }
    let (n, big_n) = (labeled_y.len(), imputed.len());
    if n < 2 || big_n < 2 {
        return Err(Error::invalid(
            "sample sizes",
            alloc::format!("need at least 2 labeled and 2 imputed values, got {n} and {big_n}"),
        ));
    }
    for (what, values) in [
        ("labeled responses", labeled_y),
        ("predictions on labeled rows", predictions_on_labeled),
        ("imputed predictions", imputed),
    ] {
        if let Some(index) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite { what, index });
        }
    }
    let rect: Vec<f64> = predictions_on_labeled
        .iter()
        .zip(labeled_y)
        .map(|(f, y)| f - y)
        .collect();
    let sigma2_f = variance(imputed);
    let sigma2_rect = variance(&rect);
    let total = match convention {
        PpiConvention::Standard => sigma2_f / big_n as f64 + sigma2_rect / n as f64,
        PpiConvention::Swapped => sigma2_f / n as f64 + sigma2_rect / big_n as f64,
    };
    Ok(PpiVariance {
        sigma2_f,
        sigma2_rect,
        n,
        big_n,
        convention,
        total,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "kebab-case"))]
pub enum CalibrationMethod {
    Coverage,
    PpiMatch,
}

/// One evaluated α: estimated coverage (coverage method) or root residual
/// `tr Σ̂(α)/(n + α) − v_PPI` (PPI matching).
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize))]
pub struct CalibrationPoint {
    pub alpha: f64,
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize))]
pub struct CalibrationResult {
    pub alpha_star: f64,
    pub method: CalibrationMethod,
    /// Coverage level (coverage method) or `v_PPI` (PPI matching).
    pub target: f64,
    /// Evaluations in the order they were made.
    pub diagnostics: Vec<CalibrationPoint>,
    pub grid: Option<Vec<f64>>,
    pub bracket: Option<(f64, f64)>,
    pub iterations: usize,
    /// Residual at `alpha_star` (PPI matching only).
    pub residual: Option<f64>,
    pub converged: bool,
    pub flags: Vec<String>,
}

/// Relative residual tolerance of the PPI root.
pub const PPI_RELATIVE_TOLERANCE: f64 = 1e-8;

/// Bisection steps before giving up; 60 halvings shrink a bracket of width
/// 10⁶ below 10⁻¹².
pub const MAX_BISECTIONS: usize = 200;

/// Solves `tr Σ̂(α) / (n + α) = ppi.total` for α in `bracket`.
///
/// The base sample feeding `J₂`, `I₂` is drawn once from stream
/// `(config.seed, base sample, 0)`, so the target is a deterministic function
/// of α.
pub fn calibrate_alpha_ppi(
    data: &LabeledDataset,
    base: &BaseMeasure,
    loss: &LossModel,
    ppi: &PpiVariance,
    bracket: (f64, f64),
    config: &RunConfig,
) -> Result<CalibrationResult> {
    if !(ppi.total > 0.0 && ppi.total.is_finite()) {
        return Err(Error::invalid(
            "PPI variance",
            alloc::format!("{} is not positive", ppi.total),
        ));
    }
    let (lo, hi) = bracket;
    if !(lo >= 0.0 && hi > lo && hi.is_finite()) {
        return Err(Error::invalid(
            "bracket",
            alloc::format!("({lo}, {hi}) is not an interval in [0, ∞)"),
        ));
    }
    let mut rng = stream(config.seed, DOMAIN_BASE_SAMPLE, 0);
    let draws = base.draw_base(config.truncation, &mut rng)?;
    sandwich_root(data, &draws, loss, ppi, bracket, config)
}

/// [`calibrate_alpha_ppi`] with an explicit base sample.
pub fn sandwich_root(
    data: &LabeledDataset,
    base_draws: &ImputedDataset,
    loss: &LossModel,
    ppi: &PpiVariance,
    bracket: (f64, f64),
    config: &RunConfig,
) -> Result<CalibrationResult> {
    let controls = SolverControls::from(config);
    let n = data.len() as f64;
    let target = ppi.total;
    let mut diagnostics = Vec::new();
    let mut residual = |alpha: f64| -> Result<f64> {
        let s = empirical_sandwich(data, Some(base_draws), loss, alpha, &controls)?;
        let r = s.trace() / (n + alpha) - target;
        diagnostics.push(CalibrationPoint { alpha, value: r });
        Ok(r)
    };
    let (mut lo, mut hi) = bracket;
    let mut r_lo = residual(lo)?;
    let r_hi = residual(hi)?;
    let tol = PPI_RELATIVE_TOLERANCE * target;
    let finish = |alpha: f64, r: f64, iterations: usize, diagnostics: Vec<CalibrationPoint>| {
        let converged = r.abs() <= tol;
        let mut flags = Vec::new();
        if !converged {
            flags.push(alloc::format!(
                "bracket collapsed before the residual reached {tol:e}; best residual {r:e}"
            ));
        }
        CalibrationResult {
            alpha_star: alpha,
            method: CalibrationMethod::PpiMatch,
            target,
            diagnostics,
            grid: None,
            bracket: Some(bracket),
            iterations,
            residual: Some(r),
            converged,
            flags,
        }
    };
    if r_lo.abs() <= tol {
        return Ok(finish(lo, r_lo, 0, diagnostics));
    }
    if r_hi.abs() <= tol {
        return Ok(finish(hi, r_hi, 0, diagnostics));
    }
    if r_lo.signum() == r_hi.signum() {
        return Err(Error::Bracket {
            lo,
            hi,
            residual_lo: r_lo,
            residual_hi: r_hi,
        });
    }
    let (mut best, mut best_r) = if r_lo.abs() < r_hi.abs() {
        (lo, r_lo)
    } else {
        (hi, r_hi)
    };
    for iteration in 1..=MAX_BISECTIONS {
        let mid = 0.5 * (lo + hi);
        if !(mid > lo && mid < hi) {
            return Ok(finish(best, best_r, iteration - 1, diagnostics));
        }
        let r = residual(mid)?;
        if r.abs() < best_r.abs() {
            (best, best_r) = (mid, r);
        }
        if r.abs() <= tol {
            return Ok(finish(mid, r, iteration, diagnostics));
        }
        if r.signum() == r_lo.signum() {
            (lo, r_lo) = (mid, r);
        } else {
            hi = mid;
        }
    }
    Ok(finish(best, best_r, MAX_BISECTIONS, diagnostics))
}

#[derive(Debug, Clone, PartialEq)]
pub struct CoverageOptions {
    /// Ascending grid of α values.
    pub alphas: Vec<f64>,
    /// Empirical resamples per coverage estimate.
    pub n_boot: usize,
    /// Credible level of the intervals and the coverage target.
    pub level: f64,
    /// α qualifies when its estimated coverage is at least `level − slack`.
    pub slack: f64,
    /// Parameter coordinate whose interval is checked.
    pub coordinate: usize,
}

impl Default for CoverageOptions {
    fn default() -> Self {
        CoverageOptions {
            alphas: vec![0.0],
            n_boot: 200,
            level: 0.9,
            slack: 0.0,
            coordinate: 0,
        }
    }
}

impl CoverageOptions {
    fn validate(&self, p: usize) -> Result<()> {
        if self.alphas.is_empty() {
            return Err(Error::Empty("alpha grid"));
        }
        if self.alphas.iter().any(|a| !(*a >= 0.0 && a.is_finite())) {
            return Err(Error::invalid("alpha grid", "entries must be finite and nonnegative"));
        }
        if self.alphas.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::invalid("alpha grid", "must be strictly ascending"));
        }
        if self.n_boot < 50 {
            return Err(Error::invalid("n_boot", alloc::format!("{} < 50", self.n_boot)));
        }
        if !(self.level > 0.0 && self.level < 1.0) {
            return Err(Error::invalid("level", alloc::format!("{} not in (0, 1)", self.level)));
        }
        if !(self.slack >= 0.0 && self.slack < self.level) {
            return Err(Error::invalid(
                "slack",
                alloc::format!("{} not in [0, level)", self.slack),
            ));
        }
        if self.coordinate >= p {
            return Err(Error::invalid(
                "coordinate",
                alloc::format!("{} out of range for dimension {p}", self.coordinate),
            ));
        }
        Ok(())
    }
}

/// ERMs of `n_boot` resamples (size n, with replacement) of the labeled
/// data, at one coordinate. Resample `r` is a multinomial count vector drawn
/// from stream `(seed, resample, r)`.
pub fn resampled_erms<R: TaskRunner>(
    data: &LabeledDataset,
    loss: &LossModel,
    n_boot: usize,
    coordinate: usize,
    config: &RunConfig,
    runner: &R,
) -> Result<(Vec<f64>, usize)> {
    let controls = SolverControls::from(config);
    let n = data.len();
    let design = Design::new(data.rows(), None);
    let uniform = vec![1.0 / n as f64; n];
    let full = solve_weighted_erm_from(loss, &design, &uniform, &controls, None)?;
    let start = full.converged.then_some(full.theta);
    let fits = runner.run(n_boot, |r| {
        let mut rng = stream(config.seed, DOMAIN_RESAMPLE, r as u64);
        let mut counts = vec![0.0; n];
        for _ in 0..n {
            counts[rng.random_range(0..n)] += 1.0;
        }
        counts.iter_mut().for_each(|c| *c /= n as f64);
        solve_weighted_erm_from(loss, &design, &counts, &controls, start.as_deref())
    });
    let mut values = Vec::with_capacity(n_boot);
    let mut failed = 0;
    for (index, fit) in fits.into_iter().enumerate() {
        let fit = fit.map_err(|e| Error::Draw {
            index,
            source: alloc::boxed::Box::new(e),
        })?;
        if !fit.converged {
            failed += 1;
        }
        values.push(fit.theta[coordinate]);
    }
    Ok((values, failed))
}

/// Coverage calibration with a fixed posterior interval per α.
///
/// The resampled ERMs are computed once and reused across the grid; every α
/// runs the posterior bootstrap with `config.seed`.
pub fn calibrate_alpha_coverage<R: TaskRunner>(
    data: &LabeledDataset,
    base: Option<&BaseMeasure>,
    loss: &LossModel,
    options: &CoverageOptions,
    config: &RunConfig,
    runner: &R,
) -> Result<CalibrationResult> {
    options.validate(loss.dim())?;
    config.validate()?;
    let mut flags = Vec::new();
    let mut diagnostics = Vec::with_capacity(options.alphas.len());
    let target = options.level;
    let ys = data.responses();
    let degenerate = ys.iter().all(|&y| y == ys[0]);

    if degenerate {
        flags.push(String::from("all responses identical; coverage is trivially 1"));
        diagnostics.extend(
            options
                .alphas
                .iter()
                .map(|&alpha| CalibrationPoint { alpha, value: 1.0 }),
        );
    } else {
        let (erms, failed) = resampled_erms(data, loss, options.n_boot, options.coordinate, config, runner)?;
        if failed > 0 {
            flags.push(alloc::format!(
                "{failed} of {} resampled fits did not converge",
                options.n_boot
            ));
        }
        for &alpha in &options.alphas {
            let cfg = RunConfig {
                alpha,
                level: options.level,
                ..config.clone()
            };
            let draws = run_posterior_bootstrap(data, base, loss, &cfg, runner)?;
            let (lo, hi) = credible_interval(&draws, options.coordinate, options.level)?;
            let inside = erms.iter().filter(|&&v| v >= lo && v <= hi).count();
            diagnostics.push(CalibrationPoint {
                alpha,
                value: inside as f64 / erms.len() as f64,
            });
        }
    }

    let threshold = options.level - options.slack;
    let alpha_star = match diagnostics.iter().rev().find(|pt| pt.value >= threshold) {
        Some(pt) => pt.alpha,
        None => {
            flags.push(alloc::format!(
                "no grid point reached coverage {threshold}; returning the grid minimum"
            ));
            options.alphas[0]
        }
    };
    Ok(CalibrationResult {
        alpha_star,
        method: CalibrationMethod::Coverage,
        target,
        diagnostics,
        grid: Some(options.alphas.clone()),
        bracket: None,
        iterations: options.alphas.len(),
        residual: None,
        converged: true,
        flags,
    })
}
