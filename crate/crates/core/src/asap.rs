//! Approximate sample perturbation and the end-to-end localized pipeline.

use crate::erm::LossModel;
use crate::error::{ensure_positive, Error, Result};
use crate::geometry::{p_min_lower_bound, Certification, DomainBall};
use crate::localization::{output_perturb, LocalizationResult, DEFAULT_TAU};
use crate::privacy::{calibrate, compose_all, sample_noise, BudgetKind, Norm, PrivacyBudget};
use crate::rng::Stream;
use crate::sampler::{
    default_schedule, run_mala, MalaSchedule, Potential, QuadraticPotential, SampleResult, ScheduleConstants,
};
use crate::RegularityBounds;

/// Every symbol the pipeline derives before sampling.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PipelineParams {
    pub gamma: f64,
    /// Radius B of the sampling ball.
    pub radius: f64,
    pub lambda: f64,
    /// W∞ accuracy Δ the sampler must reach.
    pub delta_winf: f64,
    /// Failure probability ρ of the localization step.
    pub rho: f64,
    pub budget_localize: PrivacyBudget,
    pub budget_asap: PrivacyBudget,
    pub norm: Norm,
    /// Radius R₁ of the ball around θ* the sampler needs inside the domain.
    pub r1: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PipelineConfig {
    pub tau: f64,
    /// Defaults to `1/(dκ)` when unset.
    pub rho: Option<f64>,
    pub constants: ScheduleConstants,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self { tau: DEFAULT_TAU, rho: None, constants: ScheduleConstants::default() }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PipelineResult {
    pub theta_hat: Vec<f64>,
    pub theta0: Vec<f64>,
    pub localization: LocalizationResult,
    pub sample: SampleResult,
    pub params: PipelineParams,
    pub certification: Certification,
    pub schedule: MalaSchedule,
    /// Localization, reference posterior and perturbation composed.
    pub total_budget: PrivacyBudget,
    /// `J(θ̂) − J(θ*)`.
    pub excess_risk: f64,
}

fn default_rho(d: usize, bounds: &RegularityBounds, rho: Option<f64>) -> Result<f64> {
    let rho = rho.unwrap_or_else(|| 1.0 / (d as f64 * bounds.condition_number()));
    ensure_positive("rho", rho)?;
    if rho >= 1.0 {
        return Err(Error::param("rho", format!("must lie in (0, 1), got {rho}")));
    }
    Ok(rho)
}

/// Pure ε-DP parameters.
///
/// B is the smallest radius with
/// `B − 8√(2dGB/(εαn)) ≥ 2d(G + τα) ln(d/ρ)/(nαε) + τ/n`, i.e. the positive
/// root of the quadratic in √B. Then `γ = ε/(2GB)`,
/// `Δ = dG ln(d/ρ)/(2n²αε)` and `R₁ = 8√(d/(γαn))`.
pub fn derive_params_pure(
    n: usize,
    d: usize,
    bounds: &RegularityBounds,
    epsilon: f64,
    rho: Option<f64>,
    tau: f64,
) -> Result<PipelineParams> {
    ensure_positive("epsilon", epsilon)?;
    ensure_positive("tau", tau)?;
    let rho = default_rho(d, bounds, rho)?;
    let (nf, df) = (n as f64, d as f64);
    let (g, alpha) = (bounds.lipschitz, bounds.strong_convexity);
    let log_term = (df / rho).ln();

    let c1 = 8.0 * (2.0 * df * g / (epsilon * alpha * nf)).sqrt();
    let c2 = 2.0 * df * (g + tau * alpha) * log_term / (nf * alpha * epsilon) + tau / nf;
    let root = 0.5 * (c1 + (c1 * c1 + 4.0 * c2).sqrt());
    let radius = root * root;
    let gamma = epsilon / (2.0 * g * radius);
    let budget = PrivacyBudget::pure(epsilon)?;
    Ok(PipelineParams {
        gamma,
        radius,
        lambda: 0.0,
        delta_winf: df * g * log_term / (2.0 * nf * nf * alpha * epsilon),
        rho,
        budget_localize: budget,
        budget_asap: budget,
        norm: Norm::L1,
        r1: 8.0 * (df / (gamma * alpha * nf)).sqrt(),
    })
}

/// μ-GDP parameters:
/// `B = (2√2(τα + G)(√d + √ln(1/ρ)) + 8G√d + ταμ)/(αnμ)`, `γ = μ²αn/G²`,
/// `Δ = √d G/(√2 n² α μ)`.
pub fn derive_params_gdp(
    n: usize,
    d: usize,
    bounds: &RegularityBounds,
    mu: f64,
    rho: Option<f64>,
    tau: f64,
) -> Result<PipelineParams> {
    ensure_positive("mu", mu)?;
    ensure_positive("tau", tau)?;
    let rho = default_rho(d, bounds, rho)?;
    let (nf, sd) = (n as f64, (d as f64).sqrt());
    let (g, alpha) = (bounds.lipschitz, bounds.strong_convexity);

    let radius = (2.0 * std::f64::consts::SQRT_2 * (tau * alpha + g) * (sd + (1.0 / rho).ln().sqrt())
        + 8.0 * g * sd
        + tau * alpha * mu)
        / (alpha * nf * mu);
    let gamma = mu * mu * alpha * nf / (g * g);
    let budget = PrivacyBudget::gdp(mu)?;
    Ok(PipelineParams {
        gamma,
        radius,
        lambda: 0.0,
        delta_winf: sd * g / (std::f64::consts::SQRT_2 * nf * nf * alpha * mu),
        rho,
        budget_localize: budget,
        budget_asap: budget,
        norm: Norm::L2,
        r1: 8.0 * (d as f64 / (gamma * alpha * nf)).sqrt(),
    })
}

/// Dispatches on the budget kind.
pub fn derive_params(
    n: usize,
    d: usize,
    bounds: &RegularityBounds,
    budget: PrivacyBudget,
    rho: Option<f64>,
    tau: f64,
) -> Result<PipelineParams> {
    match budget.kind() {
        BudgetKind::Pure => derive_params_pure(n, d, bounds, budget.value(), rho, tau),
        BudgetKind::Gdp => derive_params_gdp(n, d, bounds, budget.value(), rho, tau),
    }
}

/// Adds Laplace(2Δ/ε′) per coordinate (pure, ℓ1) or N(0, (2Δ/μ′)² I)
/// (GDP, ℓ2) to an approximate sample.
pub fn asap_perturb(
    theta_tilde: &[f64],
    delta_winf: f64,
    budget_prime: PrivacyBudget,
    norm: Norm,
    rng: &mut Stream,
) -> Result<Vec<f64>> {
    let expected = match budget_prime.kind() {
        BudgetKind::Pure => Norm::L1,
        BudgetKind::Gdp => Norm::L2,
    };
    if norm != expected {
        return Err(Error::NormMismatch { norm, kind: budget_prime.kind() });
    }
    let spec = calibrate(2.0 * delta_winf, budget_prime, norm, theta_tilde.len())?;
    let noise = sample_noise(&spec, rng);
    Ok(theta_tilde.iter().zip(&noise).map(|(t, z)| t + z).collect())
}

/// Localize, sample, perturb. `budget` is spent by each of the three stages,
/// so the release satisfies 3ε-DP or √3μ-GDP.
pub fn run_localized_asap(
    model: &LossModel<f64>,
    bounds: &RegularityBounds,
    budget: PrivacyBudget,
    config: &PipelineConfig,
    rng: &mut Stream,
) -> Result<PipelineResult> {
    let n = model.n();
    let d = model.d();
    let localization = output_perturb(model, bounds, config.tau, budget, rng)?;
    let params = derive_params(n, d, bounds, budget, config.rho, config.tau)?;

    let ball = DomainBall::new(localization.theta0.clone(), params.radius, params.r1)?;
    let p_min = p_min_lower_bound(params.gamma, model, bounds, &ball, &ball.center)?;
    let certification = Certification::new(p_min, params.delta_winf, d, params.norm)?;
    let schedule = default_schedule(bounds, params.gamma, n, &certification, d, &config.constants)?;

    let potential = QuadraticPotential::centered(model)?;
    let sample = run_mala(&potential, &schedule, &ball, rng, None)?;
    let theta_hat = asap_perturb(&sample.theta, params.delta_winf, params.budget_asap, params.norm, rng)?;

    let total_budget = compose_all(&[params.budget_localize, budget, params.budget_asap])?;
    let excess_risk = potential.value(&theta_hat)?;
    Ok(PipelineResult {
        theta_hat,
        theta0: localization.theta0.clone(),
        localization,
        sample,
        params,
        certification,
        schedule,
        total_budget,
        excess_risk,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::erm::Dataset;
    use crate::rng::{derive_stream, stream};
    use crate::sampler::MalaSchedule;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use rand_distr::StandardNormal;

    fn sample_bounds() -> RegularityBounds {
        RegularityBounds::new(3.0, 0.5, 2.0).unwrap()
    }

    #[test]
    fn pure_radius_solves_inequality() {
        let b = sample_bounds();
        for (n, d, eps, tau) in [(100, 2, 1.0, 1e-6), (1599, 11, 0.3, 1e-3), (7, 1, 10.0, 0.5)] {
            let p = derive_params_pure(n, d, &b, eps, Some(0.01), tau).unwrap();
            let (nf, df) = (n as f64, d as f64);
            let lhs = p.radius - 8.0 * (2.0 * df * 3.0 * p.radius / (eps * 0.5 * nf)).sqrt();
            let rhs = 2.0 * df * (3.0 + tau * 0.5) * (df / 0.01).ln() / (nf * 0.5 * eps) + tau / nf;
            assert!((lhs / rhs - 1.0).abs() < 1e-9);
            assert!((p.gamma * 2.0 * 3.0 * p.radius - eps).abs() < 1e-12 * eps);
            assert!(p.radius >= p.r1);
            assert_eq!(p.norm, Norm::L1);
            assert_eq!(p.lambda, 0.0);
        }
    }

    #[test]
    fn gdp_parameters() {
        let b = sample_bounds();
        let p = derive_params_gdp(200, 3, &b, 1.0, Some(0.05), 1e-300).unwrap();
        assert!((p.gamma * 9.0 - 1.0 * 0.5 * 200.0).abs() < 1e-9);
        let limit =
            (2.0 * 2f64.sqrt() * 3.0 * (3f64.sqrt() + (20f64).ln().sqrt()) + 24.0 * 3f64.sqrt()) / (0.5 * 200.0);
        assert!((p.radius / limit - 1.0).abs() < 1e-12);
        assert!(p.radius >= p.r1);

        let q = derive_params_gdp(200, 3, &b, 2.0, Some(0.05), 1e-300).unwrap();
        assert!((q.delta_winf * 2.0 - p.delta_winf).abs() < 1e-15);
        assert!((q.radius * 2.0 / p.radius - 1.0).abs() < 1e-12);
        assert_eq!(q.norm, Norm::L2);

        // ρ defaults to 1/(dκ).
        let r = derive_params_gdp(200, 3, &b, 1.0, None, 1e-6).unwrap();
        assert!((r.rho - 1.0 / 12.0).abs() < 1e-15);
        assert!(derive_params_gdp(200, 3, &b, 1.0, Some(1.5), 1e-6).is_err());
    }

    #[test]
    fn perturbation_scales() {
        let zero = [0.0; 1];
        let mut rng = stream(5);
        let draws = 400_000;
        let eps = PrivacyBudget::pure(1.0).unwrap();
        let mean_abs =
            (0..draws).map(|_| asap_perturb(&zero, 0.1, eps, Norm::L1, &mut rng).unwrap()[0].abs()).sum::<f64>()
                / draws as f64;
        assert!((mean_abs / 0.2 - 1.0).abs() < 0.01);

        let mu = PrivacyBudget::gdp(0.5).unwrap();
        let var = (0..draws).map(|_| asap_perturb(&zero, 0.1, mu, Norm::L2, &mut rng).unwrap()[0].powi(2)).sum::<f64>()
            / draws as f64;
        assert!((var / 0.16 - 1.0).abs() < 0.01);

        let tiny = asap_perturb(&[1.5, -2.0], 1e-300, mu, Norm::L2, &mut rng).unwrap();
        assert_eq!(tiny, vec![1.5, -2.0]);

        assert!(matches!(asap_perturb(&zero, 0.1, eps, Norm::L2, &mut rng), Err(Error::NormMismatch { .. })));
        assert!(matches!(asap_perturb(&zero, 0.1, mu, Norm::L1, &mut rng), Err(Error::NormMismatch { .. })));
    }

    #[test]
    fn perturbed_law_is_a_convolution() {
        // θ̃ ~ N(0, 1); θ̂ = θ̃ + Laplace(b) has characteristic function e^{−t²/2}/(1 + b²t²).
        let mut rng = stream(9);
        let budget = PrivacyBudget::pure(2.0).unwrap();
        let b = 2.0 * 0.3 / 2.0;
        let draws: Vec<f64> = (0..1_000_000)
            .map(|_| {
                let z: f64 = rng.sample(StandardNormal);
                asap_perturb(&[z], 0.3, budget, Norm::L1, &mut rng).unwrap()[0]
            })
            .collect();
        for t in [0.25, 0.5, 1.0, 2.0] {
            let re = draws.iter().map(|x| (t * x).cos()).sum::<f64>() / draws.len() as f64;
            let im = draws.iter().map(|x| (t * x).sin()).sum::<f64>() / draws.len() as f64;
            let expected = (-t * t / 2.0).exp() / (1.0 + b * b * t * t);
            assert!((re - expected).abs() < 3e-3 && im.abs() < 3e-3, "t={t}: {re} vs {expected}");
        }
    }

    #[test]
    fn gibbs_excess_is_at_most_dimension_over_gamma() {
        let d = 3;
        let q = QuadraticPotential::isotropic(vec![0.5; d], 4.0).unwrap();
        let gamma = 2.5;
        let init_std = 1.0 / (gamma * 4.0f64).sqrt();
        let sched = MalaSchedule::new(gamma, 0.2 * init_std * init_std, 10, 1, init_std).unwrap();
        let ball = DomainBall::new(vec![0.5; d], 20.0 * init_std, 0.0).unwrap();
        let reps = 10_000;
        let values: Vec<f64> = (0..reps)
            .map(|r| {
                let s = run_mala(&q, &sched, &ball, &mut derive_stream(1, &[r]), None).unwrap();
                q.value(&s.theta).unwrap()
            })
            .collect();
        let mean = values.iter().sum::<f64>() / reps as f64;
        let sd = (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (reps as f64 - 1.0)).sqrt();
        // For a Gaussian posterior the exact value is d/(2γ).
        assert!((mean - d as f64 / (2.0 * gamma)).abs() < 4.0 * sd / (reps as f64).sqrt());
        assert!(mean <= d as f64 / gamma + 3.0 * sd / (reps as f64).sqrt());
    }

    fn toy_model(seed: u64, n: usize, d: usize) -> LossModel<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let truth: Vec<f64> = (0..d).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let rows: Vec<Vec<f64>> = (0..n).map(|_| (0..d).map(|_| rng.gen_range(-1.0..1.0)).collect()).collect();
        let labels = rows.iter().map(|x| crate::linalg::dot(x, &truth) + 0.1 * rng.gen_range(-1.0..1.0)).collect();
        LossModel::new(Dataset::new(rows, labels).unwrap(), 0.5).unwrap()
    }

    #[test]
    fn pipeline_reports_composed_budget() {
        let m = toy_model(3, 50, 2);
        let bounds = m.certify_bounds(m.minimizer_radius(), &[0.0, 0.0]).unwrap();
        let cfg = PipelineConfig::default();
        let r = run_localized_asap(&m, &bounds, PrivacyBudget::pure(1.0).unwrap(), &cfg, &mut stream(1)).unwrap();
        assert_eq!(r.total_budget, PrivacyBudget::pure(3.0).unwrap());
        assert!(r.excess_risk >= -1e-9);
        assert!(r.schedule.n_steps <= cfg.constants.k_max);

        let r = run_localized_asap(&m, &bounds, PrivacyBudget::gdp(1.0).unwrap(), &cfg, &mut stream(2)).unwrap();
        assert!((r.total_budget.value() - 3f64.sqrt()).abs() < 1e-15);
        assert_eq!(r.total_budget.kind(), BudgetKind::Gdp);

        let huge = run_localized_asap(&m, &bounds, PrivacyBudget::gdp(1e9).unwrap(), &cfg, &mut stream(3)).unwrap();
        assert!(huge.excess_risk < 1e-6, "{}", huge.excess_risk);
        assert!(huge.sample.accepted_inside_domain);
    }
}
