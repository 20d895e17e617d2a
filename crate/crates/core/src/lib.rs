//! Posterior bootstrap for Dirichlet-process priors whose base measure is the
//! predictive distribution of an external model.
//!
//! The crate is `no_std` (it needs `alloc`). Every random quantity is drawn
//! from a [`rng::stream`] keyed by a master seed and a task index, so results
//! do not depend on how work is scheduled; parallel execution is plugged in
//! through [`bootstrap::TaskRunner`].
//!
//! Module map:
//!
//! * [`data`]: labeled and imputed datasets, run configuration.
//! * [`base_measure`]: atomic and predictive base measures.
//! * [`weights`]: Dirichlet weights via the Exp/Gamma representation.
//! * [`loss`]: loss functions with exact derivatives.
//! * [`erm`]: weighted empirical risk minimization.
//! * [`bootstrap`]: the posterior bootstrap, credible intervals, predictions.
//! * [`sandwich`]: information matrices and `J⁻¹ I J⁻¹`.
//! * [`calibration`]: choosing the concentration parameter.
#![no_std]
// `!(x > 0.0)` deliberately rejects NaN
#![allow(clippy::neg_cmp_op_on_partial_ord)]

extern crate alloc;
#[cfg(test)]
extern crate std;

pub mod base_measure;
pub mod bootstrap;
pub mod calibration;
pub mod data;
pub mod erm;
mod error;
pub mod lbfgs;
pub mod linalg;
pub mod loss;
pub mod math;
pub mod rng;
pub mod sandwich;
pub mod weights;

pub use base_measure::{AtomicBase, BaseMeasure, PredictiveBase};
pub use bootstrap::{
    credible_interval, majority_vote_predict, posterior_predictive_probs, run_posterior_bootstrap, PosteriorDraws,
    Serial, TaskRunner,
};
pub use calibration::{
    calibrate_alpha_coverage, calibrate_alpha_ppi, ppi_variance_mean, ppi_variance_mean_with, CalibrationMethod,
    CalibrationPoint, CalibrationResult, CoverageOptions, PpiConvention, PpiVariance,
};
pub use data::{Design, ImputedDataset, LabeledDataset, Rows, RunConfig};
pub use erm::{solve_weighted_erm, ErmSolution, SolverControls};
pub use error::{Error, Result};
pub use loss::{weighted_objective, LossModel, SmoothLoss};
pub use sandwich::{empirical_sandwich, SandwichEstimate};
pub use weights::{sample_weights, WeightVector};
