//! Pure-DP and Gaussian-DP empirical risk minimization by localized posterior
//! sampling.
//!
//! The pipeline privately localizes with output perturbation, samples the
//! Gibbs posterior `exp(-γ J(θ))` restricted to a ball with a constrained
//! Metropolis-adjusted Langevin sampler, and finally perturbs the sample with
//! noise scaled to a certified Wasserstein-∞ gap so the release keeps a pure
//! ε-DP or μ-GDP guarantee.
//!
//! Module map:
//!
//! * [`erm`]: ridge loss model, gradients, exact minimizer, regularity bounds.
//! * [`privacy`]: budgets, composition, noise calibration and sampling.
//! * [`localization`]: approximate output perturbation.
//! * [`geometry`]: ball volumes, density lower bounds, TV→W∞ thresholds.
//! * [`sampler`]: constrained MALA and its schedule.
//! * [`asap`]: sample perturbation and the end-to-end pipeline.
//! * [`baselines`]: noisy gradient descent and DP-GD with automatic clipping.
//! * [`bounds`]: closed-form excess-risk rates.
//! * [`harness`]: data loading, experiment orchestration, CSV reports.
//!
//! The ERM layer is generic over the floating point type; the aliases below fix
//! it to `f64`, which is what the rest of the crate operates on.

// `!(x > 0.0)` is used deliberately so NaN fails validation.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod asap;
pub mod baselines;
pub mod bounds;
pub mod erm;
pub mod error;
pub mod geometry;
pub mod harness;
pub mod linalg;
pub mod localization;
pub mod privacy;
pub mod rng;
pub mod sampler;
pub mod scalar;

pub use error::{Error, Result};
pub use privacy::{BudgetKind, Norm, PrivacyBudget};
pub use scalar::Scalar;

/// Double precision dataset.
pub type Dataset = erm::Dataset<f64>;
/// Double precision ridge loss model.
pub type LossModel = erm::LossModel<f64>;
/// Double precision regularity constants.
pub type RegularityBounds = erm::RegularityBounds<f64>;

/// Single precision dataset, for callers that keep features in `f32`.
pub type Dataset32 = erm::Dataset<f32>;
/// Single precision ridge loss model.
pub type LossModel32 = erm::LossModel<f32>;
