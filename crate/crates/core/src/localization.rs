//! Approximate output perturbation: the private center θ₀ of the sampling
//! domain.

use crate::erm::LossModel;
use crate::error::{ensure_positive, Error, Result};
use crate::linalg;
use crate::privacy::{calibrate, sample_noise, Norm, PrivacyBudget};
use crate::rng::Stream;
use crate::{RegularityBounds, Scalar};

/// Default optimization tolerance τ; the optimizer must land within τ/n of
/// the minimizer.
pub const DEFAULT_TAU: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq)]
pub struct LocalizationResult {
    /// Released center θ₀ = θ_opt + Z.
    pub theta0: Vec<f64>,
    /// Non-private near-minimizer θ_opt.
    pub theta_opt: Vec<f64>,
    /// Δ̃ = 2τ/n + 2G/(αn).
    pub sensitivity: f64,
    pub tau: f64,
    pub budget_spent: PrivacyBudget,
}

/// ℓ2 sensitivity `2τ/n + 2G/(αn)` of a τ/n-accurate minimizer under
/// replace-one neighbors.
pub fn sensitivity(bounds: &RegularityBounds, n: usize, tau: f64) -> f64 {
    let n = n as f64;
    2.0 * tau / n + 2.0 * bounds.lipschitz / (bounds.strong_convexity * n)
}

/// Returns θ with `‖θ − θ*‖₂ ≤ τ/n`, certified through strong convexity:
/// `‖θ − θ*‖ ≤ ‖∇J(θ)‖ / (nα + λ)`.
///
/// Uses the closed-form solve followed by at most a few steps of iterative
/// refinement if rounding leaves the certificate short.
pub fn optimize_to_tolerance<S: Scalar>(model: &LossModel<S>, tau: S) -> Result<Vec<S>> {
    if !(tau > S::zero()) {
        return Err(Error::param("tau", format!("must be > 0, got {tau}")));
    }
    let n = S::lit(model.n() as f64);
    let m = n * model.reg_alpha + model.reg_lambda;
    let target = tau / n;
    let mut theta = model.exact_minimizer()?;
    for _ in 0..4 {
        let grad = model.total_gradient(&theta)?;
        if linalg::norm2(&grad) / m <= target {
            return Ok(theta);
        }
        let correction = linalg::solve(model.hessian(), grad, model.d())?;
        for (t, c) in theta.iter_mut().zip(&correction) {
            *t = *t - *c;
        }
    }
    Err(Error::Singular(format!("could not certify a minimizer within τ/n = {target} in this precision")))
}

/// Plain gradient descent with step `1/(nβ + λ)` for a fixed number of steps.
pub fn gradient_descent(
    model: &LossModel<f64>,
    bounds: &RegularityBounds,
    theta_init: &[f64],
    n_steps: usize,
) -> Result<Vec<f64>> {
    let (smooth, _) = model.curvature_bounds(bounds);
    let mut theta = theta_init.to_vec();
    for _ in 0..n_steps {
        let grad = model.total_gradient(&theta)?;
        linalg::axpy(-1.0 / smooth, &grad, &mut theta);
    }
    Ok(theta)
}

/// Gradient descent stopped once `‖∇J‖/(nα + λ) ≤ τ/n`. Returns the iterate
/// and the number of steps taken.
pub fn gradient_descent_to_tolerance(
    model: &LossModel<f64>,
    bounds: &RegularityBounds,
    theta_init: &[f64],
    tau: f64,
    max_steps: usize,
) -> Result<(Vec<f64>, usize)> {
    ensure_positive("tau", tau)?;
    let (smooth, strong) = model.curvature_bounds(bounds);
    let target = tau / model.n() as f64;
    let mut theta = theta_init.to_vec();
    for step in 0..=max_steps {
        let grad = model.total_gradient(&theta)?;
        if grad.iter().any(|g| !g.is_finite()) {
            return Err(Error::NonFiniteGradient { step });
        }
        if linalg::norm2(&grad) / strong <= target {
            return Ok((theta, step));
        }
        if step < max_steps {
            linalg::axpy(-1.0 / smooth, &grad, &mut theta);
        }
    }
    Err(Error::param("max_steps", format!("tolerance {target} not reached in {max_steps} steps")))
}

/// Releases `θ₀ = θ_opt + Z` with Z calibrated to the ℓ2 sensitivity Δ̃:
/// Laplace(√d·Δ̃/ε) per coordinate, or N(0, (Δ̃/μ)² I).
pub fn output_perturb(
    model: &LossModel<f64>,
    bounds: &RegularityBounds,
    tau: f64,
    budget: PrivacyBudget,
    rng: &mut Stream,
) -> Result<LocalizationResult> {
    let theta_opt = optimize_to_tolerance(model, tau)?;
    let sens = sensitivity(bounds, model.n(), tau);
    let spec = calibrate(sens, budget, Norm::L2, model.d())?;
    let noise = sample_noise(&spec, rng);
    let theta0 = theta_opt.iter().zip(&noise).map(|(t, z)| t + z).collect();
    Ok(LocalizationResult { theta0, theta_opt, sensitivity: sens, tau, budget_spent: budget })
}
