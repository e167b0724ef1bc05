//! Metropolis-adjusted Langevin sampling of `exp(−γJ)` restricted to a ball.

use rand::Rng;
use rand_distr::StandardNormal;
use std::io::Write;

use crate::erm::LossModel;
use crate::error::{ensure_positive, Error, Result};
use crate::geometry::{Certification, DomainBall};
use crate::linalg;
use crate::rng::Stream;
use crate::RegularityBounds;

/// A differentiable potential `J`.
pub trait Potential: Sync {
    fn dim(&self) -> usize;
    fn value(&self, theta: &[f64]) -> Result<f64>;
    fn gradient(&self, theta: &[f64]) -> Result<Vec<f64>>;
}

impl Potential for LossModel<f64> {
    fn dim(&self) -> usize {
        self.d()
    }

    fn value(&self, theta: &[f64]) -> Result<f64> {
        self.total_objective(theta)
    }

    fn gradient(&self, theta: &[f64]) -> Result<Vec<f64>> {
        self.total_gradient(theta)
    }
}

/// `J(θ) = offset + ½(θ − m)ᵀ H (θ − m)` with a dense symmetric `H`.
///
/// The ridge objective is exactly of this form, and evaluating it costs
/// O(d²) instead of O(nd).
#[derive(Debug, Clone, PartialEq)]
pub struct QuadraticPotential {
    pub hessian: Vec<f64>,
    pub minimizer: Vec<f64>,
    pub offset: f64,
}

impl QuadraticPotential {
    /// Exact quadratic form of a ridge objective.
    pub fn from_model(model: &LossModel<f64>) -> Result<Self> {
        let minimizer = model.exact_minimizer()?;
        let offset = model.total_objective(&minimizer)?;
        Ok(Self { hessian: model.hessian(), minimizer, offset })
    }

    /// `J(θ) − J(θ*)`: the same form with the minimum shifted to zero, which
    /// keeps log densities and excess risks free of cancellation.
    pub fn centered(model: &LossModel<f64>) -> Result<Self> {
        Ok(Self { offset: 0.0, ..Self::from_model(model)? })
    }

    /// `(curvature/2) ‖θ − mean‖²`.
    pub fn isotropic(mean: Vec<f64>, curvature: f64) -> Result<Self> {
        ensure_positive("curvature", curvature)?;
        let d = mean.len();
        let mut hessian = vec![0.0; d * d];
        for i in 0..d {
            hessian[i * d + i] = curvature;
        }
        Ok(Self { hessian, minimizer: mean, offset: 0.0 })
    }

    fn check(&self, theta: &[f64]) -> Result<Vec<f64>> {
        if theta.len() != self.minimizer.len() {
            return Err(Error::DimensionMismatch { expected: self.minimizer.len(), actual: theta.len() });
        }
        Ok(linalg::sub(theta, &self.minimizer))
    }
}

impl Potential for QuadraticPotential {
    fn dim(&self) -> usize {
        self.minimizer.len()
    }

    fn value(&self, theta: &[f64]) -> Result<f64> {
        let delta = self.check(theta)?;
        Ok(self.offset + 0.5 * linalg::dot(&delta, &linalg::mat_vec(&self.hessian, &delta)))
    }

    fn gradient(&self, theta: &[f64]) -> Result<Vec<f64>> {
        let delta = self.check(theta)?;
        Ok(linalg::mat_vec(&self.hessian, &delta))
    }
}

/// Unnormalized log density `−γ J(θ)`.
pub fn log_target<P: Potential + ?Sized>(potential: &P, gamma: f64, theta: &[f64]) -> Result<f64> {
    if gamma == 0.0 {
        potential.value(theta)?;
        return Ok(0.0);
    }
    Ok(-gamma * potential.value(theta)?)
}

/// `ln q(to | from)` up to a constant, for the proposal `N(from − hγ∇J(from), 2h I)`.
fn log_proposal(to: &[f64], from: &[f64], grad_from: &[f64], h: f64, gamma: f64) -> f64 {
    let sq: f64 = to
        .iter()
        .zip(from)
        .zip(grad_from)
        .map(|((t, f), g)| {
            let r = t - f + h * gamma * g;
            r * r
        })
        .sum();
    -sq / (4.0 * h)
}

/// Metropolis–Hastings log ratio `ln[π(prop) q(θ|prop)] − ln[π(θ) q(prop|θ)]`.
pub fn mh_log_accept<P: Potential + ?Sized>(
    potential: &P,
    theta: &[f64],
    prop: &[f64],
    h: f64,
    gamma: f64,
) -> Result<f64> {
    ensure_positive("step size", h)?;
    let g_theta = potential.gradient(theta)?;
    let g_prop = potential.gradient(prop)?;
    Ok(log_target(potential, gamma, prop)? - log_target(potential, gamma, theta)?
        + log_proposal(theta, prop, &g_prop, h, gamma)
        - log_proposal(prop, theta, &g_theta, h, gamma))
}

/// Tunables for the sampler, with the constants hidden in the mixing bounds
/// exposed as `c_h`, `c_k`, `c_tau`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScheduleConstants {
    pub c_h: f64,
    pub c_k: f64,
    pub c_tau: f64,
    /// Cap on the number of steps per chain.
    pub k_max: usize,
}

impl Default for ScheduleConstants {
    fn default() -> Self {
        Self { c_h: 1.0, c_k: 1.0, c_tau: 1.0, k_max: 2_000 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MalaSchedule {
    pub gamma: f64,
    /// h
    pub step_size: f64,
    /// K actually run per chain.
    pub n_steps: usize,
    pub max_restarts: usize,
    /// Standard deviation of the initial Gaussian around the ball center.
    pub init_std: f64,
    /// K demanded by the mixing bound before the cap.
    pub theoretical_steps: f64,
}

impl MalaSchedule {
    pub fn new(gamma: f64, step_size: f64, n_steps: usize, max_restarts: usize, init_std: f64) -> Result<Self> {
        let s = Self { gamma, step_size, n_steps, max_restarts, init_std, theoretical_steps: n_steps as f64 };
        s.validate()?;
        Ok(s)
    }

    fn validate(&self) -> Result<()> {
        ensure_positive("step_size", self.step_size)?;
        if !(self.gamma >= 0.0) || !self.gamma.is_finite() {
            return Err(Error::param("gamma", "must be finite and ≥ 0"));
        }
        if self.n_steps == 0 || self.max_restarts == 0 {
            return Err(Error::param("schedule", "need n_steps ≥ 1 and max_restarts ≥ 1"));
        }
        if !(self.init_std >= 0.0) {
            return Err(Error::param("init_std", "must be ≥ 0"));
        }
        Ok(())
    }
}

/// Step size, chain length and restart budget for accuracy Δ in W∞.
///
/// With `L = d ln κ + ln(1/ξ)`:
/// `h = c_h min{κ^{-1/2}(γnβ)^{-1} L^{-1/2}, (γnβd)^{-1}}`,
/// `K = c_K L max{κ^{3/2} √L, dκ}` (capped at `k_max`),
/// `τ_max = ⌈c_τ ln(2/ξ)⌉`, and the chain starts from `N(center, (γnβ)^{-1} I)`.
pub fn default_schedule(
    bounds: &RegularityBounds,
    gamma: f64,
    n: usize,
    cert: &Certification,
    d: usize,
    constants: &ScheduleConstants,
) -> Result<MalaSchedule> {
    ensure_positive("gamma", gamma)?;
    if n == 0 || d == 0 {
        return Err(Error::param("n, d", "must be ≥ 1"));
    }
    let df = d as f64;
    let kappa = bounds.condition_number();
    let scale = gamma * n as f64 * bounds.smoothness;
    let log_inv_xi = -cert.xi.ln;
    let big_l = df * kappa.ln() + log_inv_xi;
    if !(big_l > 0.0) || !big_l.is_finite() {
        return Err(Error::param("xi", format!("d ln κ + ln(1/ξ) must be positive and finite, got {big_l}")));
    }
    let step_size = constants.c_h * (1.0 / (kappa.sqrt() * scale * big_l.sqrt())).min(1.0 / (scale * df));
    let theoretical_steps = (constants.c_k * big_l * (kappa.powf(1.5) * big_l.sqrt()).max(df * kappa)).ceil();
    let n_steps = (theoretical_steps.min(constants.k_max as f64) as usize).max(1);
    let max_restarts = ((constants.c_tau * (std::f64::consts::LN_2 + log_inv_xi)).ceil() as usize).max(1);
    let schedule =
        MalaSchedule { gamma, step_size, n_steps, max_restarts, init_std: (1.0 / scale).sqrt(), theoretical_steps };
    schedule.validate()?;
    Ok(schedule)
}

#[derive(Debug, Clone, PartialEq)]
pub struct SampleResult {
    pub theta: Vec<f64>,
    /// Chains run, including the successful one.
    pub restarts_used: usize,
    /// False when every chain ended outside the ball and the center was
    /// returned instead.
    pub accepted_inside_domain: bool,
    /// Fraction of accepted proposals over all chains.
    pub mh_acceptance_rate: f64,
}

/// One row of the optional per-step trace.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TraceRow {
    pub step: usize,
    pub log_target: f64,
    pub accepted: bool,
}

/// Writes a trace as CSV with header `step,log_target,accepted`.
pub fn write_trace_csv<W: Write>(rows: &[TraceRow], mut out: W) -> Result<()> {
    writeln!(out, "step,log_target,accepted")?;
    for r in rows {
        writeln!(out, "{},{:.17e},{}", r.step, r.log_target, u8::from(r.accepted))?;
    }
    Ok(())
}

/// Runs up to `max_restarts` unconstrained MALA chains of `n_steps` steps,
/// each started from `N(ball.center, init_std² I)`, and returns the first
/// terminal state inside the ball. When every chain ends outside, the ball
/// center is returned.
///
/// Steps are appended to `trace` when one is given; across restarts the step
/// counter keeps increasing.
pub fn run_mala<P: Potential + ?Sized>(
    potential: &P,
    schedule: &MalaSchedule,
    ball: &DomainBall,
    rng: &mut Stream,
    mut trace: Option<&mut Vec<TraceRow>>,
) -> Result<SampleResult> {
    schedule.validate()?;
    let d = potential.dim();
    if ball.dim() != d {
        return Err(Error::DimensionMismatch { expected: d, actual: ball.dim() });
    }
    let h = schedule.step_size;
    let gamma = schedule.gamma;
    let noise_scale = (2.0 * h).sqrt();
    let mut accepted = 0u64;
    let mut proposed = 0u64;
    let mut global_step = 0usize;

    for restart in 1..=schedule.max_restarts {
        let mut theta: Vec<f64> = ball
            .center
            .iter()
            .map(|c| {
                let z: f64 = rng.sample(StandardNormal);
                c + schedule.init_std * z
            })
            .collect();
        let mut log_pi = log_target(potential, gamma, &theta)?;
        let mut grad = potential.gradient(&theta)?;

        for _ in 0..schedule.n_steps {
            if grad.iter().any(|g| !g.is_finite()) || !log_pi.is_finite() {
                return Err(Error::NonFiniteGradient { step: global_step });
            }
            let prop: Vec<f64> = theta
                .iter()
                .zip(&grad)
                .map(|(t, g)| {
                    let z: f64 = rng.sample(StandardNormal);
                    t - h * gamma * g + noise_scale * z
                })
                .collect();
            let prop_log_pi = log_target(potential, gamma, &prop)?;
            let prop_grad = potential.gradient(&prop)?;
            let ratio = prop_log_pi - log_pi + log_proposal(&theta, &prop, &prop_grad, h, gamma)
                - log_proposal(&prop, &theta, &grad, h, gamma);
            let u: f64 = rng.gen();
            let accept = ratio >= 0.0 || u.ln() < ratio;
            proposed += 1;
            if accept {
                accepted += 1;
                theta = prop;
                log_pi = prop_log_pi;
                grad = prop_grad;
            }
            if let Some(rows) = trace.as_deref_mut() {
                rows.push(TraceRow { step: global_step, log_target: log_pi, accepted: accept });
            }
            global_step += 1;
        }

        if ball.contains(&theta) {
            return Ok(SampleResult {
                theta,
                restarts_used: restart,
                accepted_inside_domain: true,
                mh_acceptance_rate: accepted as f64 / proposed as f64,
            });
        }
    }
    Ok(SampleResult {
        theta: ball.center.clone(),
        restarts_used: schedule.max_restarts,
        accepted_inside_domain: false,
        mh_acceptance_rate: accepted as f64 / proposed as f64,
    })
}
