//! Comparison methods: projected noisy gradient descent and DP-GD with
//! automatic per-sample clipping.

use crate::erm::LossModel;
use crate::error::{ensure_positive, Error, Result};
use crate::linalg;
use crate::privacy::{calibrate, sample_noise, BudgetKind, NoiseSpec, Norm, PrivacyBudget};
use crate::rng::Stream;
use crate::RegularityBounds;

/// Stability constant of automatic clipping, `g / (‖g‖ + AUTOCLIP_STABILITY)`.
pub const AUTOCLIP_STABILITY: f64 = 0.01;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StepRule {
    /// `η_t = step_value / (αn t)`.
    InverseT,
    /// `η_t = step_value`.
    Constant,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GdConfig {
    /// T
    pub n_iters: usize,
    pub step_rule: StepRule,
    pub step_value: f64,
    /// Iterates are projected onto `B(projection_center, projection_radius)`.
    pub projection_radius: f64,
    pub projection_center: Vec<f64>,
    /// Total budget of the whole trajectory.
    pub budget: PrivacyBudget,
}

impl GdConfig {
    fn validate(&self, d: usize) -> Result<()> {
        if self.n_iters == 0 {
            return Err(Error::param("n_iters", "must be ≥ 1"));
        }
        ensure_positive("step_value", self.step_value)?;
        ensure_positive("projection_radius", self.projection_radius)?;
        if self.projection_center.len() != d {
            return Err(Error::DimensionMismatch { expected: d, actual: self.projection_center.len() });
        }
        Ok(())
    }

    /// Per-step budget that composes to the total over `n_iters` steps.
    pub fn per_step_budget(&self) -> Result<PrivacyBudget> {
        self.budget.split_even(self.n_iters)
    }
}

/// Iteration count `⌈κ ln n⌉` of the smooth variant.
pub fn smooth_default_iters(bounds: &RegularityBounds, n: usize) -> usize {
    ((bounds.condition_number() * (n as f64).ln()).ceil() as usize).max(1)
}

fn require_gdp(budget: PrivacyBudget) -> Result<f64> {
    match budget.kind() {
        BudgetKind::Gdp => Ok(budget.value()),
        other => Err(Error::BudgetKindMismatch(other, BudgetKind::Gdp)),
    }
}

/// One projected noisy step `θ ← Proj(θ − η(∇J(θ) + Z))`, `Z ~ N(0, σ² I)`.
fn noisy_step(
    model: &LossModel<f64>,
    cfg: &GdConfig,
    theta: &mut [f64],
    eta: f64,
    sigma: f64,
    rng: &mut Stream,
) -> Result<()> {
    let mut grad = model.total_gradient(theta)?;
    if sigma > 0.0 {
        let noise = sample_noise(&NoiseSpec::gaussian(sigma, theta.len())?, rng);
        linalg::axpy(1.0, &noise, &mut grad);
    }
    linalg::axpy(-eta, &grad, theta);
    linalg::project_to_ball(theta, &cfg.projection_center, cfg.projection_radius);
    Ok(())
}

/// Noise standard deviation `2G√T/μ`: the summed gradient has replace-one
/// sensitivity 2G, and T steps at `μ/√T` each compose to μ.
fn gd_noise_std(bounds: &RegularityBounds, cfg: &GdConfig, mu: f64) -> f64 {
    2.0 * bounds.lipschitz * (cfg.n_iters as f64).sqrt() / mu
}

/// Projected noisy GD with `η_t = c/(αn t)`, returning the weighted average
/// `Σ 2t/(T(T+1)) θ_t`. GDP only.
pub fn noisy_gd_lipschitz(
    model: &LossModel<f64>,
    bounds: &RegularityBounds,
    cfg: &GdConfig,
    rng: &mut Stream,
) -> Result<Vec<f64>> {
    let mu = require_gdp(cfg.budget)?;
    cfg.validate(model.d())?;
    let t_total = cfg.n_iters as f64;
    let alpha_n = bounds.strong_convexity * model.n() as f64;
    let sigma = gd_noise_std(bounds, cfg, mu);
    let mut theta = cfg.projection_center.clone();
    let mut average = vec![0.0; model.d()];
    for t in 1..=cfg.n_iters {
        let eta = match cfg.step_rule {
            StepRule::InverseT => cfg.step_value / (alpha_n * t as f64),
            StepRule::Constant => cfg.step_value,
        };
        noisy_step(model, cfg, &mut theta, eta, sigma, rng)?;
        linalg::axpy(2.0 * t as f64 / (t_total * (t_total + 1.0)), &theta, &mut average);
    }
    Ok(average)
}

/// Projected noisy GD with a constant step `η ≤ 1/(nβ)`, returning θ_T.
/// GDP only.
pub fn noisy_gd_smooth(
    model: &LossModel<f64>,
    bounds: &RegularityBounds,
    cfg: &GdConfig,
    rng: &mut Stream,
) -> Result<Vec<f64>> {
    let mu = require_gdp(cfg.budget)?;
    cfg.validate(model.d())?;
    let limit = 1.0 / (model.n() as f64 * bounds.smoothness);
    let eta = match cfg.step_rule {
        StepRule::Constant => cfg.step_value,
        StepRule::InverseT => return Err(Error::param("step_rule", "the smooth variant uses a constant step")),
    };
    if eta > limit * (1.0 + 1e-12) {
        return Err(Error::param("step_value", format!("{eta} exceeds 1/(nβ) = {limit}")));
    }
    let sigma = gd_noise_std(bounds, cfg, mu);
    let mut theta = cfg.projection_center.clone();
    for _ in 0..cfg.n_iters {
        noisy_step(model, cfg, &mut theta, eta, sigma, rng)?;
    }
    Ok(theta)
}

/// Sum of automatically clipped per-sample gradients `Σ g_i/(‖g_i‖ + 0.01)`.
pub fn autoclip_gradient_sum(model: &LossModel<f64>, theta: &[f64]) -> Result<Vec<f64>> {
    let mut sum = vec![0.0; model.d()];
    for i in 0..model.n() {
        let g = model.per_sample_gradient(theta, i)?;
        let scale = 1.0 / (linalg::norm2(&g) + AUTOCLIP_STABILITY);
        linalg::axpy(scale, &g, &mut sum);
    }
    Ok(sum)
}

/// Full-batch DP-GD on automatically clipped gradients. Each clipped
/// gradient has norm below 1, so the sum has replace-one sensitivity 2; the
/// per-step budget is `ε/T` (Laplace, ℓ2 lifted by √d) or `μ/√T`
/// (Gaussian). Returns the final iterate.
pub fn dp_gd_autoclip(model: &LossModel<f64>, cfg: &GdConfig, rng: &mut Stream) -> Result<Vec<f64>> {
    cfg.validate(model.d())?;
    let step = cfg.per_step_budget()?;
    let spec = calibrate(2.0, step, Norm::L2, model.d())?;
    let mut theta = cfg.projection_center.clone();
    for t in 1..=cfg.n_iters {
        let mut grad = autoclip_gradient_sum(model, &theta)?;
        linalg::axpy(1.0, &sample_noise(&spec, rng), &mut grad);
        let eta = match cfg.step_rule {
            StepRule::Constant => cfg.step_value,
            StepRule::InverseT => cfg.step_value / t as f64,
        };
        linalg::axpy(-eta, &grad, &mut theta);
        linalg::project_to_ball(&mut theta, &cfg.projection_center, cfg.projection_radius);
    }
    Ok(theta)
}
