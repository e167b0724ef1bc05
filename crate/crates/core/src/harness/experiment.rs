//! Experiment orchestration and CSV reports.

use std::io::Write;
use std::path::Path;

use rayon::prelude::*;

use super::config::{DatasetKind, ExperimentConfig, Method};
use super::data::{default_data_dir, load_wine_csv, standardize, synthetic_ridge, WINE_RED_FILE, WINE_WHITE_FILE};
use crate::asap::{run_localized_asap, PipelineConfig};
use crate::baselines::{dp_gd_autoclip, noisy_gd_lipschitz, noisy_gd_smooth, smooth_default_iters, GdConfig, StepRule};
use crate::bounds::{excess_risk_rate, RateQuery, Regime};
use crate::erm::LossModel;
use crate::error::{Error, Result};
use crate::localization::output_perturb;
use crate::privacy::{BudgetKind, PrivacyBudget};
use crate::rng::{derive_stream, Stream};
use crate::sampler::{Potential, QuadraticPotential};
use crate::Dataset;
use crate::RegularityBounds;

/// Header of the report CSV.
pub const REPORT_HEADER: &str = "method,budget_kind,budget_value,mean_excess_risk,std,reps,lower_bound";
/// Header of the localized ASAP diagnostics CSV.
pub const DIAGNOSTICS_HEADER: &str = "budget_kind,budget_value,rep,k_used,k_theoretical,max_restarts,restarts_used,inside_domain,acceptance_rate,radius,gamma,ln_xi,excess_risk";

/// Loads (or generates) and standardizes the configured dataset.
pub fn load_dataset(cfg: &ExperimentConfig) -> Result<Dataset> {
    let raw = match cfg.dataset {
        DatasetKind::Synthetic => {
            let s = &cfg.synthetic;
            synthetic_ridge(s.n, s.d, s.noise, s.seed)?
        }
        kind => {
            let path = match &cfg.dataset_path {
                Some(p) => p.clone(),
                None => {
                    default_data_dir().join(if kind == DatasetKind::WineRed { WINE_RED_FILE } else { WINE_WHITE_FILE })
                }
            };
            load_wine_csv(&path).map_err(|e| match e {
                Error::Io(io) => Error::Config(format!("cannot read {}: {io}", path.display())),
                other => other,
            })?
        }
    };
    standardize(&raw, cfg.center_labels)
}

/// The ridge problem every method is run on, with its certified constants.
#[derive(Debug, Clone)]
pub struct Problem {
    pub model: LossModel<f64>,
    pub bounds: RegularityBounds,
    /// Radius of the origin ball G is certified over; also the projection
    /// radius of the gradient baselines.
    pub cert_radius: f64,
    /// `J` around its minimizer, used for exact excess risks.
    pub excess: QuadraticPotential,
}

impl Problem {
    pub fn new(dataset: Dataset, alpha: f64, cert_radius: Option<f64>) -> Result<Self> {
        let model = LossModel::new(dataset, alpha)?;
        let cert_radius = cert_radius.unwrap_or_else(|| model.minimizer_radius()).max(f64::MIN_POSITIVE.sqrt());
        let bounds = model.certify_bounds(cert_radius, &vec![0.0; model.d()])?;
        let excess = QuadraticPotential::centered(&model)?;
        Ok(Self { model, bounds, cert_radius, excess })
    }

    pub fn from_config(cfg: &ExperimentConfig) -> Result<Self> {
        Self::new(load_dataset(cfg)?, cfg.alpha(), cfg.cert_radius)
    }

    /// `J(θ) − J(θ*)`, evaluated through the quadratic form so it stays exact
    /// for tiny gaps.
    pub fn excess_risk(&self, theta: &[f64]) -> Result<f64> {
        self.excess.value(theta)
    }

    fn gd_config(&self, n_iters: usize, step_rule: StepRule, step_value: f64, budget: PrivacyBudget) -> GdConfig {
        GdConfig {
            n_iters,
            step_rule,
            step_value,
            projection_radius: self.cert_radius,
            projection_center: vec![0.0; self.model.d()],
            budget,
        }
    }
}

/// Whether a method can spend a budget of this kind.
pub fn supports(method: Method, kind: BudgetKind) -> bool {
    !matches!((method, kind), (Method::NoisyGd | Method::NoisyGdLipschitz, BudgetKind::Pure))
}

/// Diagnostics of one localized ASAP run.
#[derive(Debug, Clone, PartialEq)]
pub struct PipelineDiagnostics {
    pub budget: PrivacyBudget,
    pub rep: usize,
    pub k_used: usize,
    pub k_theoretical: f64,
    pub max_restarts: usize,
    pub restarts_used: usize,
    pub inside_domain: bool,
    pub acceptance_rate: f64,
    pub radius: f64,
    pub gamma: f64,
    pub ln_xi: f64,
    pub excess_risk: f64,
}

struct CellOutput {
    theta: Vec<f64>,
    diagnostics: Option<PipelineDiagnostics>,
}

/// Runs one method once at a total budget.
fn run_cell(
    problem: &Problem,
    cfg: &ExperimentConfig,
    method: Method,
    budget: PrivacyBudget,
    rep: usize,
    rng: &mut Stream,
) -> Result<CellOutput> {
    let model = &problem.model;
    let bounds = &problem.bounds;
    let n = model.n() as f64;
    let theta = match method {
        Method::LocalizedAsap => {
            let pcfg = PipelineConfig { tau: cfg.tau, rho: Some(cfg.rho), constants: cfg.schedule.into() };
            let r = run_localized_asap(model, bounds, budget.split_even(3)?, &pcfg, rng)?;
            let diagnostics = PipelineDiagnostics {
                budget,
                rep,
                k_used: r.schedule.n_steps,
                k_theoretical: r.schedule.theoretical_steps,
                max_restarts: r.schedule.max_restarts,
                restarts_used: r.sample.restarts_used,
                inside_domain: r.sample.accepted_inside_domain,
                acceptance_rate: r.sample.mh_acceptance_rate,
                radius: r.params.radius,
                gamma: r.params.gamma,
                ln_xi: r.certification.xi.ln,
                excess_risk: problem.excess_risk(&r.theta_hat)?,
            };
            return Ok(CellOutput { theta: r.theta_hat, diagnostics: Some(diagnostics) });
        }
        Method::OutputPerturb => output_perturb(model, bounds, cfg.tau, budget, rng)?.theta0,
        Method::DpGdAutoclip => {
            let gd = problem.gd_config(cfg.dp_gd.n_iters, StepRule::Constant, cfg.dp_gd.step_value / n, budget);
            dp_gd_autoclip(model, &gd, rng)?
        }
        Method::NoisyGd => {
            let t = cfg.noisy_gd.n_iters.unwrap_or_else(|| smooth_default_iters(bounds, model.n()));
            let gd = problem.gd_config(t, StepRule::Constant, 1.0 / (n * bounds.smoothness), budget);
            noisy_gd_smooth(model, bounds, &gd, rng)?
        }
        Method::NoisyGdLipschitz => {
            let t = cfg.noisy_gd.n_iters.unwrap_or(model.n());
            let gd = problem.gd_config(t, StepRule::InverseT, 1.0, budget);
            noisy_gd_lipschitz(model, bounds, &gd, rng)?
        }
    };
    Ok(CellOutput { theta, diagnostics: None })
}

/// Aggregate over the repetitions of one (method, budget) pair.
#[derive(Debug, Clone, PartialEq)]
pub struct MethodStats {
    pub method: Method,
    pub budget: PrivacyBudget,
    pub mean_excess_risk: f64,
    /// Sample standard deviation; 0 for a single repetition.
    pub std: f64,
    pub min: f64,
    pub max: f64,
    /// Successful repetitions.
    pub reps: usize,
    /// `(rep, message)` for every repetition that returned an error.
    pub failures: Vec<(usize, String)>,
    /// Closed-form rate for this budget kind and value.
    pub lower_bound: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunReport {
    pub rows: Vec<MethodStats>,
    pub diagnostics: Vec<PipelineDiagnostics>,
    pub seed: u64,
    pub config_hash: String,
    pub n: usize,
    pub d: usize,
    pub bounds: RegularityBounds,
}

fn summarize(values: &[f64]) -> (f64, f64, f64, f64) {
    if values.is_empty() {
        return (f64::NAN, f64::NAN, f64::NAN, f64::NAN);
    }
    let k = values.len() as f64;
    let mean = values.iter().sum::<f64>() / k;
    let std = if values.len() > 1 {
        (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (k - 1.0)).sqrt()
    } else {
        0.0
    };
    let min = values.iter().copied().fold(f64::INFINITY, f64::min);
    let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    (mean, std, min, max)
}

/// Runs the configured experiment on a prepared problem.
///
/// Every (method, budget, repetition) cell draws from its own stream derived
/// from `(seed, method, budget index, rep)`, so results do not depend on
/// scheduling. Pairs a method cannot run (noisy GD with a pure budget) are
/// skipped; failed repetitions are kept in [`MethodStats::failures`].
pub fn run_on_problem(problem: &Problem, cfg: &ExperimentConfig) -> Result<RunReport> {
    cfg.validate()?;
    let mut cells = Vec::new();
    for &method in &cfg.methods {
        for (bi, &budget) in cfg.budgets.iter().enumerate() {
            if !supports(method, budget.kind()) {
                continue;
            }
            for rep in 0..cfg.repetitions {
                cells.push((method, bi, budget, rep));
            }
        }
    }

    let outcomes: Vec<Result<(f64, Option<PipelineDiagnostics>)>> = cells
        .par_iter()
        .map(|&(method, bi, budget, rep)| {
            let mut rng = derive_stream(cfg.seed, &[method.stream_id(), bi as u64, rep as u64]);
            let out = run_cell(problem, cfg, method, budget, rep, &mut rng)?;
            Ok((problem.excess_risk(&out.theta)?, out.diagnostics))
        })
        .collect();

    let mut rows = Vec::new();
    let mut diagnostics = Vec::new();
    for (chunk_cells, chunk_out) in cells.chunks(cfg.repetitions).zip(outcomes.chunks(cfg.repetitions)) {
        let (method, _, budget, _) = chunk_cells[0];
        let mut values = Vec::with_capacity(cfg.repetitions);
        let mut failures = Vec::new();
        for (&(_, _, _, rep), out) in chunk_cells.iter().zip(chunk_out) {
            match out {
                Ok((v, diag)) => {
                    values.push(*v);
                    diagnostics.extend(diag.clone());
                }
                Err(e) => failures.push((rep, e.to_string())),
            }
        }
        let (mean, std, min, max) = summarize(&values);
        let regime = match budget.kind() {
            BudgetKind::Pure => Regime::Pure,
            BudgetKind::Gdp => Regime::Gdp,
        };
        let lower_bound = excess_risk_rate(&RateQuery {
            regime,
            d: problem.model.d(),
            n: problem.model.n(),
            g: problem.bounds.lipschitz,
            alpha: problem.bounds.strong_convexity,
            budget: budget.value(),
            delta: None,
        })?;
        rows.push(MethodStats {
            method,
            budget,
            mean_excess_risk: mean,
            std,
            min,
            max,
            reps: values.len(),
            failures,
            lower_bound,
        });
    }

    Ok(RunReport {
        rows,
        diagnostics,
        seed: cfg.seed,
        config_hash: cfg.hash()?,
        n: problem.model.n(),
        d: problem.model.d(),
        bounds: problem.bounds,
    })
}

/// Loads the data named by the config and runs the experiment.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<RunReport> {
    cfg.validate()?;
    run_on_problem(&Problem::from_config(cfg)?, cfg)
}

/// Writes the report CSV: one header row, then one row per (method, budget)
/// in config order, numbers with 17 significant digits.
pub fn write_report_csv<W: Write>(report: &RunReport, mut out: W) -> Result<()> {
    writeln!(out, "{REPORT_HEADER}")?;
    for r in &report.rows {
        writeln!(
            out,
            "{},{},{:.16e},{:.16e},{:.16e},{},{:.16e}",
            r.method,
            r.budget.kind(),
            r.budget.value(),
            r.mean_excess_risk,
            r.std,
            r.reps,
            r.lower_bound
        )?;
    }
    Ok(())
}

pub fn emit_report_csv(report: &RunReport, path: &Path) -> Result<()> {
    let mut file = std::io::BufWriter::new(std::fs::File::create(path)?);
    write_report_csv(report, &mut file)?;
    file.flush()?;
    Ok(())
}

pub fn write_diagnostics_csv<W: Write>(diagnostics: &[PipelineDiagnostics], mut out: W) -> Result<()> {
    writeln!(out, "{DIAGNOSTICS_HEADER}")?;
    for g in diagnostics {
        writeln!(
            out,
            "{},{:.16e},{},{},{:.16e},{},{},{},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e}",
            g.budget.kind(),
            g.budget.value(),
            g.rep,
            g.k_used,
            g.k_theoretical,
            g.max_restarts,
            g.restarts_used,
            u8::from(g.inside_domain),
            g.acceptance_rate,
            g.radius,
            g.gamma,
            g.ln_xi,
            g.excess_risk
        )?;
    }
    Ok(())
}
