//! Datasets and run configuration.
//!
//! Covariates are stored row-major with a fixed width `dim`, which may be zero
//! for location problems (mean, quantile). All constructors validate; once a
//! value exists it satisfies its invariants.

use alloc::format;
use alloc::vec::Vec;

use crate::error::{Error, Result};

/// Probability rows within this distance of summing to one are rescaled;
/// rows further away are rejected.
pub const RENORMALIZATION_TOLERANCE: f64 = 1e-3;

fn check_finite(values: &[f64], what: &'static str) -> Result<()> {
    match values.iter().position(|v| !v.is_finite()) {
        Some(index) => Err(Error::NonFinite { what, index }),
        None => Ok(()),
    }
}

fn check_class_labels(labels: &[f64], classes: usize) -> Result<()> {
    for (row, &label) in labels.iter().enumerate() {
        if !crate::math::is_class_index(label, classes) {
            return Err(Error::InvalidClassLabel { row, label, classes });
        }
    }
    Ok(())
}

/// Borrowed view of hard-labeled rows.
#[derive(Debug, Clone, Copy)]
pub struct Rows<'a> {
    responses: &'a [f64],
    covariates: &'a [f64],
    dim: usize,
}

impl<'a> Rows<'a> {
    pub fn new(responses: &'a [f64], covariates: &'a [f64], dim: usize) -> Result<Self> {
        if covariates.len() != responses.len() * dim {
            return Err(Error::DimensionMismatch {
                what: "covariate matrix entries",
                expected: responses.len() * dim,
                found: covariates.len(),
            });
        }
        Ok(Rows {
            responses,
            covariates,
            dim,
        })
    }

    pub fn len(&self) -> usize {
        self.responses.len()
    }

    pub fn is_empty(&self) -> bool {
        self.responses.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn responses(&self) -> &'a [f64] {
        self.responses
    }

    pub fn covariates(&self, i: usize) -> &'a [f64] {
        &self.covariates[i * self.dim..(i + 1) * self.dim]
    }

    pub fn iter(&self) -> impl Iterator<Item = (f64, &'a [f64])> + 'a {
        let rows = *self;
        (0..rows.len()).map(move |i| (rows.responses[i], rows.covariates(i)))
    }
}

/// Observed rows followed by (optional) imaginary rows, the row set of one
/// randomized objective. Weights are always laid out in the same order.
#[derive(Debug, Clone, Copy)]
pub struct Design<'a> {
    observed: Rows<'a>,
    imaginary: Option<Rows<'a>>,
}

impl<'a> Design<'a> {
    pub fn new(observed: Rows<'a>, imaginary: Option<Rows<'a>>) -> Self {
        Design { observed, imaginary }
    }

    pub fn observed(&self) -> Rows<'a> {
        self.observed
    }

    pub fn imaginary(&self) -> Option<Rows<'a>> {
        self.imaginary
    }

    pub fn len(&self) -> usize {
        self.observed.len() + self.imaginary.map_or(0, |r| r.len())
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn iter(&self) -> impl Iterator<Item = (f64, &'a [f64])> + 'a {
        self.observed
            .iter()
            .chain(self.imaginary.into_iter().flat_map(|r| r.iter()))
    }
}

/// Observed pairs `(yᵢ, xᵢ)`.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledDataset {
    responses: Vec<f64>,
    covariates: Vec<f64>,
    dim: usize,
    classes: Option<usize>,
}

impl LabeledDataset {
    pub fn new(responses: Vec<f64>, covariates: Vec<f64>, dim: usize) -> Result<Self> {
        if responses.is_empty() {
            return Err(Error::Empty("labeled dataset"));
        }
        Rows::new(&responses, &covariates, dim)?;
        check_finite(&responses, "responses")?;
        check_finite(&covariates, "covariates")?;
        Ok(LabeledDataset {
            responses,
            covariates,
            dim,
            classes: None,
        })
    }

    /// A dataset without covariates.
    pub fn from_responses(responses: Vec<f64>) -> Result<Self> {
        Self::new(responses, Vec::new(), 0)
    }

    /// Declares the responses to be class indices in `0..classes`.
    pub fn with_classes(mut self, classes: usize) -> Result<Self> {
        if classes < 2 {
            return Err(Error::invalid("class count", format!("{classes} < 2")));
        }
        check_class_labels(&self.responses, classes)?;
        self.classes = Some(classes);
        Ok(self)
    }

    pub fn len(&self) -> usize {
        self.responses.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn classes(&self) -> Option<usize> {
        self.classes
    }

    pub fn responses(&self) -> &[f64] {
        &self.responses
    }

    pub fn covariate_matrix(&self) -> &[f64] {
        &self.covariates
    }

    pub fn covariates(&self, i: usize) -> &[f64] {
        &self.covariates[i * self.dim..(i + 1) * self.dim]
    }

    pub fn rows(&self) -> Rows<'_> {
        Rows {
            responses: &self.responses,
            covariates: &self.covariates,
            dim: self.dim,
        }
    }

    /// Rows at `indices`, in that order (repeats allowed).
    pub fn select(&self, indices: &[usize]) -> Self {
        let mut responses = Vec::with_capacity(indices.len());
        let mut covariates = Vec::with_capacity(indices.len() * self.dim);
        for &i in indices {
            responses.push(self.responses[i]);
            covariates.extend_from_slice(self.covariates(i));
        }
        LabeledDataset {
            responses,
            covariates,
            dim: self.dim,
            classes: self.classes,
        }
    }
}

/// Rows produced by (or describing) the external predictive model: covariates
/// plus hard labels, predictive class probabilities, or both.
///
/// A probability matrix with a single column holds `P(Y = 1)` of a binary
/// problem; with `K ≥ 2` columns each row is a full distribution over classes.
#[derive(Debug, Clone, PartialEq)]
pub struct ImputedDataset {
    covariates: Vec<f64>,
    dim: usize,
    len: usize,
    labels: Option<Vec<f64>>,
    probabilities: Option<Vec<f64>>,
    probability_columns: usize,
    prompt_weights: Option<Vec<f64>>,
}

impl ImputedDataset {
    fn check_covariates(covariates: &[f64], dim: usize, len: usize) -> Result<()> {
        if len == 0 {
            return Err(Error::Empty("imputed dataset"));
        }
        if covariates.len() != len * dim {
            return Err(Error::DimensionMismatch {
                what: "covariate matrix entries",
                expected: len * dim,
                found: covariates.len(),
            });
        }
        check_finite(covariates, "covariates")
    }

    pub fn from_labels(covariates: Vec<f64>, dim: usize, labels: Vec<f64>) -> Result<Self> {
        Self::check_covariates(&covariates, dim, labels.len())?;
        check_finite(&labels, "labels")?;
        Ok(ImputedDataset {
            len: labels.len(),
            covariates,
            dim,
            labels: Some(labels),
            probabilities: None,
            probability_columns: 0,
            prompt_weights: None,
        })
    }

    /// Builds from a row-major `N × columns` probability matrix, rescaling
    /// rows whose sum lies within [`RENORMALIZATION_TOLERANCE`] of one.
    pub fn from_probabilities(
        covariates: Vec<f64>,
        dim: usize,
        mut probabilities: Vec<f64>,
        columns: usize,
    ) -> Result<Self> {
        if columns == 0 {
            return Err(Error::invalid("probability columns", "need at least one"));
        }
        if !probabilities.len().is_multiple_of(columns) {
            return Err(Error::DimensionMismatch {
                what: "probability matrix entries",
                expected: (probabilities.len() / columns + 1) * columns,
                found: probabilities.len(),
            });
        }
        let len = probabilities.len() / columns;
        Self::check_covariates(&covariates, dim, len)?;
        for (row, chunk) in probabilities.chunks_exact_mut(columns).enumerate() {
            for (column, &value) in chunk.iter().enumerate() {
                if !(0.0..=1.0).contains(&value) {
                    return Err(Error::InvalidProbability { row, column, value });
                }
            }
            if columns > 1 {
                let sum: f64 = chunk.iter().sum();
                if (sum - 1.0).abs() > RENORMALIZATION_TOLERANCE {
                    return Err(Error::ProbabilityRowSum { row, sum });
                }
                chunk.iter_mut().for_each(|p| *p /= sum);
            }
        }
        Ok(ImputedDataset {
            covariates,
            dim,
            len,
            labels: None,
            probabilities: Some(probabilities),
            probability_columns: columns,
            prompt_weights: None,
        })
    }

    /// Attaches hard labels alongside probabilities.
    pub fn with_labels(mut self, labels: Vec<f64>) -> Result<Self> {
        if labels.len() != self.len {
            return Err(Error::DimensionMismatch {
                what: "label count",
                expected: self.len,
                found: labels.len(),
            });
        }
        check_finite(&labels, "labels")?;
        self.labels = Some(labels);
        Ok(self)
    }

    /// Attaches nonnegative prompt weights `gᵢ` (normalized by the base measure).
    pub fn with_prompt_weights(mut self, weights: Vec<f64>) -> Result<Self> {
        if weights.len() != self.len {
            return Err(Error::DimensionMismatch {
                what: "prompt weight count",
                expected: self.len,
                found: weights.len(),
            });
        }
        check_finite(&weights, "prompt weights")?;
        if weights.iter().any(|&g| g < 0.0) {
            return Err(Error::invalid("prompt weights", "negative entry"));
        }
        if !weights.iter().any(|&g| g > 0.0) {
            return Err(Error::ZeroWeights);
        }
        self.prompt_weights = Some(weights);
        Ok(self)
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn covariate_matrix(&self) -> &[f64] {
        &self.covariates
    }

    pub fn covariates(&self, i: usize) -> &[f64] {
        &self.covariates[i * self.dim..(i + 1) * self.dim]
    }

    pub fn labels(&self) -> Option<&[f64]> {
        self.labels.as_deref()
    }

    pub fn probabilities(&self) -> Option<&[f64]> {
        self.probabilities.as_deref()
    }

    pub fn probability_columns(&self) -> usize {
        self.probability_columns
    }

    pub fn probability_row(&self, i: usize) -> Option<&[f64]> {
        let c = self.probability_columns;
        self.probabilities.as_deref().map(|p| &p[i * c..(i + 1) * c])
    }

    /// `P(Y = 1)` for a binary probability matrix.
    pub fn positive_probability(&self, i: usize) -> Option<f64> {
        match (self.probability_row(i), self.probability_columns) {
            (Some(row), 1) => Some(row[0]),
            (Some(row), 2) => Some(row[1]),
            _ => None,
        }
    }

    /// Number of classes described by the probability matrix.
    pub fn classes(&self) -> Option<usize> {
        match self.probability_columns {
            0 => None,
            1 => Some(2),
            k => Some(k),
        }
    }

    pub fn prompt_weights(&self) -> Option<&[f64]> {
        self.prompt_weights.as_deref()
    }

    /// The hard-labeled rows, if labels are present.
    pub fn label_rows(&self) -> Option<Rows<'_>> {
        self.labels.as_deref().map(|labels| Rows {
            responses: labels,
            covariates: &self.covariates,
            dim: self.dim,
        })
    }
}

/// Controls for a posterior bootstrap run.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct RunConfig {
    /// Concentration α of the Dirichlet process; zero skips imaginary data.
    pub alpha: f64,
    /// Truncation size m: imaginary rows drawn per bootstrap iteration.
    pub truncation: usize,
    /// Number of posterior draws B.
    pub draws: usize,
    /// Credible level of reported intervals.
    pub level: f64,
    pub seed: u64,
    pub max_iter: usize,
    pub tol: f64,
    /// Fraction of non-converged draws tolerated before the run aborts.
    pub max_nonconverged_fraction: f64,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            alpha: 0.0,
            truncation: 100_000,
            draws: 1000,
            level: 0.9,
            seed: 0,
            max_iter: 500,
            tol: 1e-8,
            max_nonconverged_fraction: 0.0,
        }
    }
}

impl RunConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.alpha >= 0.0 && self.alpha.is_finite()) {
            return Err(Error::invalid(
                "alpha",
                format!("{} is not a finite nonnegative number", self.alpha),
            ));
        }
        if self.truncation == 0 {
            return Err(Error::invalid("truncation size", "must be positive"));
        }
        if self.draws == 0 {
            return Err(Error::invalid("draw count", "must be positive"));
        }
        if !(self.level > 0.0 && self.level < 1.0) {
            return Err(Error::invalid("level", format!("{} not in (0, 1)", self.level)));
        }
        if !(self.tol > 0.0) {
            return Err(Error::invalid("tol", "must be positive"));
        }
        if self.max_iter == 0 {
            return Err(Error::invalid("max_iter", "must be at least 1"));
        }
        if !(0.0..=1.0).contains(&self.max_nonconverged_fraction) {
            return Err(Error::invalid("non-converged fraction", "must lie in [0, 1]"));
        }
        Ok(())
    }
}
