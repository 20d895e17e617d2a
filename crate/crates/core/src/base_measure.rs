//! The base measure of the Dirichlet-process prior.
//!
//! An [`AtomicBase`] is a fixed set of labeled atoms. A [`PredictiveBase`]
//! factorizes into a distribution over prompts (rows of an imputed dataset,
//! weights `gᵢ`) and, given the prompt, the model's predictive distribution
//! over labels: Bernoulli or categorical when probabilities are available,
//! otherwise the row's recorded prediction.

use alloc::vec::Vec;

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::Rng;

use crate::data::ImputedDataset;
use crate::error::{Error, Result};
use crate::math::compensated_sum;

/// Atoms `(y*ⱼ, x*ⱼ)` with equal mass.
#[derive(Debug, Clone, PartialEq)]
pub struct AtomicBase {
    atoms: ImputedDataset,
}

impl AtomicBase {
    /// The atoms must carry hard labels.
    pub fn new(atoms: ImputedDataset) -> Result<Self> {
        if atoms.labels().is_none() {
            return Err(Error::invalid("atomic base", "atoms need hard labels"));
        }
        Ok(AtomicBase { atoms })
    }

    pub fn atoms(&self) -> &ImputedDataset {
        &self.atoms
    }

    pub fn len(&self) -> usize {
        self.atoms.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }
}

#[derive(Debug, Clone, PartialEq)]
enum LabelSampler {
    /// Single probability column, `P(Y = 1)`.
    Bernoulli,
    /// Full distribution over `K` classes.
    Categorical(usize),
    /// Recorded predictions, returned as-is.
    Recorded,
}

#[derive(Debug, Clone)]
enum Prompts {
    Uniform,
    Weighted(WeightedIndex<f64>),
}

/// Prompt distribution `Σ gᵢ δ_{xᵢ}` times the predictive label distribution.
#[derive(Debug, Clone)]
pub struct PredictiveBase {
    rows: ImputedDataset,
    prompt_weights: Vec<f64>,
    prompts: Prompts,
    sampler: LabelSampler,
}

impl PredictiveBase {
    pub fn new(rows: ImputedDataset) -> Result<Self> {
        let sampler = match (rows.probability_columns(), rows.labels()) {
            (0, Some(_)) => LabelSampler::Recorded,
            (0, None) => {
                return Err(Error::invalid(
                    "predictive base",
                    "rows carry neither labels nor probabilities",
                ))
            }
            (1, _) => LabelSampler::Bernoulli,
            (k, _) => LabelSampler::Categorical(k),
        };
        let n = rows.len();
        let (prompt_weights, prompts) = match rows.prompt_weights() {
            None => (alloc::vec![1.0 / n as f64; n], Prompts::Uniform),
            Some(raw) => {
                let total = compensated_sum(raw.iter().copied());
                let g: Vec<f64> = raw.iter().map(|w| w / total).collect();
                let index =
                    WeightedIndex::new(&g).map_err(|e| Error::invalid("prompt weights", alloc::format!("{e}")))?;
                (g, Prompts::Weighted(index))
            }
        };
        Ok(PredictiveBase {
            rows,
            prompt_weights,
            prompts,
            sampler,
        })
    }

    pub fn rows(&self) -> &ImputedDataset {
        &self.rows
    }

    /// Normalized prompt weights `gᵢ`.
    pub fn prompt_weights(&self) -> &[f64] {
        &self.prompt_weights
    }

    /// Expected label under the base measure, `Σ gᵢ E[Y | xᵢ]`, for samplers
    /// with numeric labels (Bernoulli or recorded).
    pub fn mean_label(&self) -> Option<f64> {
        let per_row = |i: usize| match self.sampler {
            LabelSampler::Bernoulli => self.rows.positive_probability(i),
            LabelSampler::Recorded => self.rows.labels().map(|l| l[i]),
            LabelSampler::Categorical(_) => None,
        };
        let mut terms = Vec::with_capacity(self.rows.len());
        for (i, g) in self.prompt_weights.iter().enumerate() {
            terms.push(g * per_row(i)?);
        }
        Some(compensated_sum(terms))
    }

    fn prompt<R: Rng + ?Sized>(&self, rng: &mut R) -> usize {
        match &self.prompts {
            Prompts::Uniform => rng.random_range(0..self.rows.len()),
            Prompts::Weighted(index) => index.sample(rng),
        }
    }

    fn label<R: Rng + ?Sized>(&self, row: usize, rng: &mut R) -> f64 {
        match self.sampler {
            LabelSampler::Recorded => self.rows.labels().expect("recorded sampler has labels")[row],
            LabelSampler::Bernoulli => {
                let p = self.rows.probability_row(row).expect("probabilities")[0];
                if rng.random::<f64>() < p {
                    1.0
                } else {
                    0.0
                }
            }
            LabelSampler::Categorical(k) => {
                let probs = self.rows.probability_row(row).expect("probabilities");
                let u: f64 = rng.random();
                let mut acc = 0.0;
                for (c, p) in probs.iter().enumerate() {
                    acc += p;
                    if u < acc {
                        return c as f64;
                    }
                }
                // u fell into the rounding gap above the last partial sum
                probs.iter().rposition(|&p| p > 0.0).unwrap_or(k - 1) as f64
            }
        }
    }

    pub(crate) fn sample_into<R: Rng + ?Sized>(
        &self,
        m: usize,
        rng: &mut R,
        labels: &mut Vec<f64>,
        covariates: &mut Vec<f64>,
    ) {
        labels.clear();
        covariates.clear();
        for _ in 0..m {
            let j = self.prompt(rng);
            labels.push(self.label(j, rng));
            covariates.extend_from_slice(self.rows.covariates(j));
        }
    }
}

impl PartialEq for PredictiveBase {
    fn eq(&self, other: &Self) -> bool {
        self.rows == other.rows && self.prompt_weights == other.prompt_weights
    }
}

/// Either kind of base measure.
#[derive(Debug, Clone, PartialEq)]
pub enum BaseMeasure {
    Atomic(AtomicBase),
    Predictive(PredictiveBase),
}

impl BaseMeasure {
    pub fn dim(&self) -> usize {
        match self {
            BaseMeasure::Atomic(a) => a.atoms.dim(),
            BaseMeasure::Predictive(p) => p.rows.dim(),
        }
    }

    /// Number of imaginary rows one draw produces for truncation `m`.
    pub fn effective_truncation(&self, m: usize) -> usize {
        match self {
            BaseMeasure::Atomic(a) => a.len(),
            BaseMeasure::Predictive(_) => m,
        }
    }

    /// Draws imaginary data. Atomic bases return their atoms verbatim and
    /// ignore `m`; predictive bases return `m` iid rows.
    pub fn draw_base<R: Rng + ?Sized>(&self, m: usize, rng: &mut R) -> Result<ImputedDataset> {
        if m == 0 {
            return Err(Error::invalid("truncation size", "must be positive"));
        }
        match self {
            BaseMeasure::Atomic(a) => {
                let atoms = &a.atoms;
                ImputedDataset::from_labels(
                    atoms.covariate_matrix().to_vec(),
                    atoms.dim(),
                    atoms.labels().expect("atomic base has labels").to_vec(),
                )
            }
            BaseMeasure::Predictive(p) => {
                let mut labels = Vec::with_capacity(m);
                let mut covariates = Vec::with_capacity(m * p.rows.dim());
                p.sample_into(m, rng, &mut labels, &mut covariates);
                ImputedDataset::from_labels(covariates, p.rows.dim(), labels)
            }
        }
    }
}

impl From<AtomicBase> for BaseMeasure {
    fn from(b: AtomicBase) -> Self {
        BaseMeasure::Atomic(b)
    }
}

impl From<PredictiveBase> for BaseMeasure {
    fn from(b: PredictiveBase) -> Self {
        BaseMeasure::Predictive(b)
    }
}

/// Hard labels by thresholding `P(Y = 1)`: label 1 iff the probability is
/// strictly greater than `cutoff`.
pub fn thresholded_labels(base: &PredictiveBase, cutoff: f64) -> Result<ImputedDataset> {
    if !(cutoff > 0.0 && cutoff < 1.0) {
        return Err(Error::invalid("cutoff", alloc::format!("{cutoff} not in (0, 1)")));
    }
    let rows = &base.rows;
    if rows.classes() != Some(2) {
        return Err(Error::invalid(
            "thresholding",
            "requires binary predictive probabilities",
        ));
    }
    let labels = (0..rows.len())
        .map(|i| {
            let p = rows.positive_probability(i).expect("binary probabilities");
            if p > cutoff {
                1.0
            } else {
                0.0
            }
        })
        .collect();
    ImputedDataset::from_labels(rows.covariate_matrix().to_vec(), rows.dim(), labels)
}
