//! `asap`: command-line driver for localized ASAP ridge regression.

use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};

use asap_core::asap::derive_params;
use asap_core::bounds::{sweep, write_rates_csv, RateTemplate, Regime, SweepAxis};
use asap_core::geometry::DomainBall;
use asap_core::harness::experiment::write_diagnostics_csv;
use asap_core::harness::{run_experiment, write_report_csv, ExperimentConfig, Problem};
use asap_core::localization::{output_perturb, DEFAULT_TAU};
use asap_core::rng::{derive_stream, stream};
use asap_core::sampler::{run_mala, write_trace_csv, MalaSchedule, QuadraticPotential};
use asap_core::{PrivacyBudget, RegularityBounds};

#[derive(Parser)]
#[command(name = "asap", version, about = "Private ridge regression by localized approximate sample perturbation")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Tabulate closed-form excess-risk rates.
    Bounds(BoundsArgs),
    /// Run an experiment described by a TOML config.
    Run(RunArgs),
    /// Draw MALA samples from an isotropic Gaussian target.
    Sample(SampleArgs),
    /// Release a privately localized estimate by output perturbation.
    Localize(LocalizeArgs),
    /// Print the parameters the pipeline derives for a problem and budget.
    Params(ParamsArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum Axis {
    N,
    Budget,
}

#[derive(Args)]
struct BoundsArgs {
    #[arg(long, value_enum, default_value = "n")]
    axis: Axis,
    /// Comma-separated sweep points.
    #[arg(long, value_delimiter = ',', default_values_t = [1e4, 1e6])]
    points: Vec<f64>,
    #[arg(long, default_value_t = 11)]
    d: usize,
    /// Sample size when sweeping the budget.
    #[arg(long, default_value_t = 10_000)]
    n: usize,
    #[arg(long = "lipschitz", default_value_t = 300.0)]
    g: f64,
    #[arg(long, default_value_t = 4.0)]
    alpha: f64,
    #[arg(long, default_value_t = 1.0)]
    epsilon: f64,
    /// GDP budget; defaults to the GDP equivalent of ε.
    #[arg(long)]
    mu: Option<f64>,
    /// δ of the approximate regime; defaults to 1/n.
    #[arg(long)]
    delta: Option<f64>,
    #[arg(long, value_delimiter = ',', default_values_t = ["pure".to_string(), "gdp".to_string(), "approx".to_string()])]
    regimes: Vec<String>,
    /// Output CSV; stdout when omitted.
    #[arg(short, long)]
    output: Option<PathBuf>,
}

#[derive(Args)]
struct RunArgs {
    /// Experiment config (TOML).
    #[arg(short, long)]
    config: PathBuf,
    /// Report CSV; stdout when omitted.
    #[arg(short, long)]
    output: Option<PathBuf>,
    /// Per-run sampler diagnostics CSV.
    #[arg(long)]
    diagnostics: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    repetitions: Option<usize>,
}

#[derive(Args)]
struct SampleArgs {
    #[arg(long, default_value_t = 2)]
    d: usize,
    /// Curvature of the potential `(c/2)‖θ‖²`.
    #[arg(long, default_value_t = 1.0)]
    curvature: f64,
    #[arg(long, default_value_t = 1.0)]
    gamma: f64,
    #[arg(long, default_value_t = 0.1)]
    step_size: f64,
    #[arg(long, default_value_t = 200)]
    steps: usize,
    #[arg(long, default_value_t = 1000)]
    chains: usize,
    /// Radius of the acceptance ball around the origin; unbounded when omitted.
    #[arg(long)]
    radius: Option<f64>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Samples CSV; stdout when omitted.
    #[arg(short, long)]
    output: Option<PathBuf>,
    /// Per-step trace of the first chain.
    #[arg(long)]
    trace: Option<PathBuf>,
}

#[derive(Args)]
struct LocalizeArgs {
    #[arg(short, long)]
    config: PathBuf,
    /// Budget spent, e.g. `pure:1` or `gdp:0.5`.
    #[arg(long)]
    budget: PrivacyBudget,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Args)]
struct ParamsArgs {
    #[arg(long)]
    n: usize,
    #[arg(long)]
    d: usize,
    #[arg(long)]
    lipschitz: f64,
    /// Per-sample strong convexity α.
    #[arg(long)]
    alpha: f64,
    /// Per-sample smoothness β.
    #[arg(long)]
    beta: f64,
    /// Per-stage budget, e.g. `pure:1` or `gdp:0.5`.
    #[arg(long)]
    budget: PrivacyBudget,
    /// Failure probability; defaults to 1/(dκ).
    #[arg(long)]
    rho: Option<f64>,
    #[arg(long, default_value_t = DEFAULT_TAU)]
    tau: f64,
}

fn open_output(path: Option<&Path>) -> Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(File::create(p).with_context(|| format!("cannot create {}", p.display()))?)),
        None => Box::new(BufWriter::new(io::stdout().lock())),
    })
}

fn bounds(args: BoundsArgs) -> Result<()> {
    let regimes = args.regimes.iter().map(|r| r.parse()).collect::<asap_core::Result<Vec<Regime>>>()?;
    let template = RateTemplate {
        d: args.d,
        n: args.n,
        g: args.g,
        alpha: args.alpha,
        epsilon: args.epsilon,
        mu: args.mu,
        delta: args.delta,
    };
    let axis = match args.axis {
        Axis::N => SweepAxis::N,
        Axis::Budget => SweepAxis::Budget,
    };
    let rows = sweep(&template, axis, &args.points, &regimes)?;
    let mut out = open_output(args.output.as_deref())?;
    write_rates_csv(&rows, &mut out)?;
    out.flush()?;
    Ok(())
}

fn run(args: RunArgs) -> Result<()> {
    let mut cfg = ExperimentConfig::from_file(&args.config)?;
    if let Some(seed) = args.seed {
        cfg.seed = seed;
    }
    if let Some(reps) = args.repetitions {
        cfg.repetitions = reps;
    }
    let report = run_experiment(&cfg)?;
    eprintln!(
        "n = {}, d = {}, G = {:.4e}, α = {:.4e}, β = {:.4e}, config {}",
        report.n,
        report.d,
        report.bounds.lipschitz,
        report.bounds.strong_convexity,
        report.bounds.smoothness,
        &report.config_hash[..12]
    );
    for row in &report.rows {
        for (rep, msg) in &row.failures {
            eprintln!("{} {} rep {rep} failed: {msg}", row.method, row.budget);
        }
    }
    let mut out = open_output(args.output.as_deref())?;
    write_report_csv(&report, &mut out)?;
    out.flush()?;
    if let Some(path) = args.diagnostics {
        let mut out = open_output(Some(&path))?;
        write_diagnostics_csv(&report.diagnostics, &mut out)?;
        out.flush()?;
    }
    Ok(())
}

fn sample(args: SampleArgs) -> Result<()> {
    if args.chains == 0 {
        bail!("--chains must be at least 1");
    }
    let potential = QuadraticPotential::isotropic(vec![0.0; args.d], args.curvature)?;
    let init_std = 1.0 / (args.gamma * args.curvature).sqrt();
    let schedule = MalaSchedule::new(args.gamma, args.step_size, args.steps, 1, init_std)?;
    let ball = DomainBall::new(vec![0.0; args.d], args.radius.unwrap_or(f64::MAX), 0.0)?;

    let mut out = open_output(args.output.as_deref())?;
    let header: Vec<String> = (0..args.d).map(|j| format!("theta_{j}")).collect();
    writeln!(out, "chain,{},accepted_inside_domain,acceptance_rate", header.join(","))?;
    let mut trace = Vec::new();
    for chain in 0..args.chains {
        let mut rng = derive_stream(args.seed, &[chain as u64]);
        let want_trace = chain == 0 && args.trace.is_some();
        let r = run_mala(&potential, &schedule, &ball, &mut rng, want_trace.then_some(&mut trace))?;
        let coords: Vec<String> = r.theta.iter().map(|v| format!("{v:.16e}")).collect();
        writeln!(
            out,
            "{chain},{},{},{:.16e}",
            coords.join(","),
            u8::from(r.accepted_inside_domain),
            r.mh_acceptance_rate
        )?;
    }
    out.flush()?;
    if let Some(path) = args.trace {
        let mut out = open_output(Some(&path))?;
        write_trace_csv(&trace, &mut out)?;
        out.flush()?;
    }
    Ok(())
}

fn localize(args: LocalizeArgs) -> Result<()> {
    let cfg = ExperimentConfig::from_file(&args.config)?;
    let problem = Problem::from_config(&cfg)?;
    let mut rng = stream(args.seed);
    let r = output_perturb(&problem.model, &problem.bounds, cfg.tau, args.budget, &mut rng)?;
    println!("sensitivity = {:.6e}", r.sensitivity);
    println!("excess_risk = {:.6e}", problem.excess_risk(&r.theta0)?);
    let coords: Vec<String> = r.theta0.iter().map(|v| format!("{v:.10e}")).collect();
    println!("theta0 = [{}]", coords.join(", "));
    Ok(())
}

fn params(args: ParamsArgs) -> Result<()> {
    let bounds = RegularityBounds::new(args.lipschitz, args.alpha, args.beta)?;
    let p = derive_params(args.n, args.d, &bounds, args.budget, args.rho, args.tau)?;
    println!("gamma = {:.6e}", p.gamma);
    println!("radius = {:.6e}", p.radius);
    println!("lambda = {:.6e}", p.lambda);
    println!("delta_winf = {:.6e}", p.delta_winf);
    println!("rho = {:.6e}", p.rho);
    println!("r1 = {:.6e}", p.r1);
    println!("norm = {}", p.norm);
    println!("budget_localize = {}", p.budget_localize);
    println!("budget_asap = {}", p.budget_asap);
    Ok(())
}

fn main() -> Result<()> {
    match Cli::parse().command {
        Command::Bounds(a) => bounds(a),
        Command::Run(a) => run(a),
        Command::Sample(a) => sample(a),
        Command::Localize(a) => localize(a),
        Command::Params(a) => params(a),
    }
}
