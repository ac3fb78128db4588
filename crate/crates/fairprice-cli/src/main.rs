//! Command-line harness for the fairness-constrained pricing simulator.
//!
//! Subcommands:
//!
//! * `run` — one seeded trial; writes a trace CSV and summary JSON, prints
//!   the headline regret/penalty/violation numbers;
//! * `sweep` — a policy x lambda x horizon grid from a config file or a
//!   built-in preset; writes results/slopes CSVs plus a run manifest;
//! * `verify-lb` — numeric verification report for the hard demand-curve
//!   pair behind the worst-case lower-bound construction;
//! * `oracle` — prints the clairvoyant benchmark for an instance as JSON.
//!
//! Exit codes: 0 success, 1 runtime failure, 2 usage/validation error. The
//! `FAIRPRICE_SEED` environment variable overrides `--seed` and any config
//! `base_seed`. Existing output files are never overwritten without
//! `--force`.

use std::fmt;
use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};

use fairprice::catalog;
use fairprice::config::parse_sweep_config;
use fairprice::demand::{verify_lb_properties, HARD_A_RANGE, HARD_H_MAX};
use fairprice::experiment::{
    fit_slope, run_sweep, write_manifest_json, write_results_csv, write_slopes_csv, SlopeFit,
    SlopeMetric,
};
use fairprice::measure::DiscrepancyFunction;
use fairprice::oracle::{self, OracleOptions};
use fairprice::sim::run_trial;
use fairprice::{
    ConstraintMode, Error as LibError, FairnessMeasure, FairnessSpec, PolicyKind, TraceOptions,
    TrialSetup,
};

/// Usage-level failure detected by the CLI itself (exit code 2).
#[derive(Debug)]
struct Usage(String);

impl fmt::Display for Usage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for Usage {}

fn usage(msg: impl Into<String>) -> anyhow::Error {
    anyhow::Error::new(Usage(msg.into()))
}

#[derive(Parser)]
#[command(
    name = "fairprice",
    version,
    about = "Simulates fairness-constrained dynamic pricing policies",
    propagate_version = true
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one seeded trial and write its trace and summary
    Run(RunArgs),
    /// Run a policy x lambda x horizon sweep from a config file or preset
    Sweep(SweepArgs),
    /// Check the hard demand-curve pair against its analytic properties
    #[command(name = "verify-lb")]
    VerifyLb(VerifyLbArgs),
    /// Print the clairvoyant benchmark for an instance as JSON
    Oracle(OracleArgs),
}

#[derive(Copy, Clone, PartialEq, Eq, ValueEnum)]
enum MeasureArg {
    /// Constrain the gap between posted prices
    Price,
    /// Constrain the gap between expected demands
    Demand,
}

#[derive(Args)]
struct RunArgs {
    /// Catalog instance name, e.g. exp-pair or lb-pair(25,0.005)
    #[arg(long)]
    instance: String,
    /// Policy name, e.g. fdp-dl or baseline-etc
    #[arg(long)]
    policy: String,
    /// Fairness tolerance in [0, 1]
    #[arg(long)]
    lambda: f64,
    /// Horizon: number of pricing periods
    #[arg(long = "T")]
    horizon: u64,
    /// Base RNG seed (overridden by FAIRPRICE_SEED if set)
    #[arg(long)]
    seed: u64,
    /// Penalty weight for soft-constraint policies
    #[arg(long, default_value_t = 1.0)]
    gamma: f64,
    /// Which per-group quantity the fairness constraint compares
    #[arg(long, value_enum, default_value_t = MeasureArg::Price)]
    measure: MeasureArg,
    /// Record every period in the trace CSV instead of sampling
    #[arg(long)]
    full_trace: bool,
    /// Directory for trace.csv and summary.json
    #[arg(long, default_value = ".")]
    out: PathBuf,
    /// Overwrite existing output files
    #[arg(long)]
    force: bool,
}

#[derive(Args)]
struct SweepArgs {
    /// Sweep config file (flat key/value format; see the README grammar)
    #[arg(long, conflicts_with = "preset")]
    config: Option<PathBuf>,
    /// Built-in sweep preset
    #[arg(long, value_enum)]
    preset: Option<PresetArg>,
    /// Directory for results.csv, slopes.csv, and manifest.json
    #[arg(long, default_value = "sweep-out")]
    out: PathBuf,
    /// Worker threads (default: the config's value, else all logical cores)
    #[arg(long)]
    workers: Option<usize>,
    /// Print the resolved grid and cost estimate without running anything
    #[arg(long)]
    dry_run: bool,
    /// Overwrite existing output files
    #[arg(long)]
    force: bool,
}

#[derive(Copy, Clone, PartialEq, Eq, ValueEnum)]
enum PresetArg {
    /// 3 policies x 5 lambdas x 4 horizons up to 2e5, 50 trials per cell
    DeskScale,
    /// The desk grid stretched to horizons up to 1e6 with 1000 trials
    FullScale,
}

#[derive(Args)]
struct VerifyLbArgs {
    /// Curvature parameter of the hard pair
    #[arg(long = "A")]
    a: f64,
    /// Bump height separating the two demand curves
    #[arg(long = "h")]
    h: f64,
    /// Price-grid step for the numeric checks
    #[arg(long, default_value_t = 1e-4)]
    grid_step: f64,
}

#[derive(Args)]
struct OracleArgs {
    /// Catalog instance name
    #[arg(long)]
    instance: String,
    /// Fairness tolerance in [0, 1]
    #[arg(long)]
    lambda: f64,
    /// Which per-group quantity the fairness constraint compares
    #[arg(long, value_enum, default_value_t = MeasureArg::Price)]
    measure: MeasureArg,
    /// Cross-check with the exhaustive grid oracle at this step instead of
    /// the structure-aware solver
    #[arg(long)]
    brute_step: Option<f64>,
}

const DESK_SCALE: &str = "\
[sweep]
name = desk-scale
instance = exp-pair
policies = fdp-dl, baseline-trisect, baseline-etc
lambdas = 0, 0.2, 0.5, 0.8, 1
horizons = 20000, 50000, 100000, 200000
trials = 50
base_seed = 17
gamma = 1
measure = price
";

const FULL_SCALE: &str = "\
[sweep]
name = full-scale
instance = exp-pair
policies = fdp-dl, baseline-trisect, baseline-etc
lambdas = 0, 0.2, 0.5, 0.8, 1
horizons = 100000, 200000, 500000, 1000000
trials = 1000
base_seed = 17
gamma = 1
measure = price
";

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Run(args) => cmd_run(args),
        Command::Sweep(args) => cmd_sweep(args),
        Command::VerifyLb(args) => cmd_verify_lb(args),
        Command::Oracle(args) => cmd_oracle(args),
    };
    match result {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            classify(&e)
        }
    }
}

/// Maps an error chain to the documented exit codes: validation and naming
/// problems are usage errors (2), everything else is a runtime failure (1).
fn classify(e: &anyhow::Error) -> ExitCode {
    for cause in e.chain() {
        if cause.is::<Usage>() {
            return ExitCode::from(2);
        }
        if let Some(lib) = cause.downcast_ref::<LibError>() {
            match lib {
                LibError::InvalidParam { .. }
                | LibError::IncompatiblePolicy { .. }
                | LibError::UnknownInstance(_)
                | LibError::UnknownPolicy(_)
                | LibError::Config(_) => return ExitCode::from(2),
                _ => {}
            }
        }
    }
    ExitCode::from(1)
}

/// `FAIRPRICE_SEED`, if set and non-empty, wins over any other seed source.
fn seed_override() -> Result<Option<u64>> {
    match std::env::var("FAIRPRICE_SEED") {
        Ok(s) if s.is_empty() => Ok(None),
        Ok(s) => s
            .parse::<u64>()
            .map(Some)
            .map_err(|_| usage(format!("FAIRPRICE_SEED: `{s}` is not a non-negative integer"))),
        Err(_) => Ok(None),
    }
}

fn refuse_overwrite(paths: &[PathBuf], force: bool) -> Result<()> {
    if force {
        return Ok(());
    }
    for p in paths {
        if p.exists() {
            anyhow::bail!("{} already exists; pass --force to overwrite", p.display());
        }
    }
    Ok(())
}

fn cmd_run(args: RunArgs) -> Result<ExitCode> {
    let instance = catalog::by_name(&args.instance)?;
    let policy: PolicyKind = args.policy.parse()?;
    let measure = match args.measure {
        MeasureArg::Price => FairnessMeasure::price(&instance),
        MeasureArg::Demand => FairnessMeasure::demand(),
    };
    let mode = match policy {
        PolicyKind::FdpGfm | PolicyKind::FdpGfmMulti => ConstraintMode::Soft { gamma: args.gamma },
        _ => ConstraintMode::Hard,
    };
    let discrepancy = match (policy, args.measure) {
        (PolicyKind::FdpDiscrepancy, MeasureArg::Price) => Some(DiscrepancyFunction::difference()),
        _ => None,
    };
    let spec = FairnessSpec::new(measure, args.lambda, mode, discrepancy)?;
    policy.validate(&instance, &spec)?;

    let seed = seed_override()?.unwrap_or(args.seed);
    let mut setup = TrialSetup::new(instance, spec, policy, args.horizon, seed);
    if args.full_trace {
        setup.trace = TraceOptions::full();
    }

    std::fs::create_dir_all(&args.out)
        .with_context(|| format!("creating {}", args.out.display()))?;
    let trace_path = args.out.join("trace.csv");
    let summary_path = args.out.join("summary.json");
    refuse_overwrite(&[trace_path.clone(), summary_path.clone()], args.force)?;

    let trace = run_trial(&setup)?;
    trace.write_csv(&trace_path)?;
    trace.write_summary_json(&summary_path)?;

    println!("instance          = {}", trace.instance);
    println!("policy            = {}", trace.policy);
    println!("lambda            = {}", trace.lambda);
    println!("T                 = {}", trace.horizon);
    println!("seed              = {}", trace.seed);
    println!("regret            = {:.6}", trace.regret);
    println!("penalized_regret  = {:.6}", trace.penalized_regret());
    println!("violation_periods = {}", trace.violation_periods);
    println!(
        "committed_prices  = [{}]",
        trace
            .committed_prices
            .iter()
            .map(|p| format!("{p:.6}"))
            .collect::<Vec<_>>()
            .join(", ")
    );
    println!("wrote {}", trace_path.display());
    println!("wrote {}", summary_path.display());
    Ok(ExitCode::SUCCESS)
}

fn cmd_sweep(args: SweepArgs) -> Result<ExitCode> {
    let (text, default_name) = match (&args.config, args.preset) {
        (Some(path), None) => {
            let text = std::fs::read_to_string(path)
                .with_context(|| format!("reading {}", path.display()))?;
            let stem = path
                .file_stem()
                .map(|s| s.to_string_lossy().into_owned())
                .unwrap_or_else(|| "sweep".to_string());
            (text, stem)
        }
        (None, Some(PresetArg::DeskScale)) => (DESK_SCALE.to_string(), "desk-scale".to_string()),
        (None, Some(PresetArg::FullScale)) => (FULL_SCALE.to_string(), "full-scale".to_string()),
        (None, None) => return Err(usage("pass either --config <path> or --preset <name>")),
        (Some(_), Some(_)) => unreachable!("clap conflicts_with forbids this"),
    };

    let mut config = parse_sweep_config(&text, &default_name)?;
    if let Some(seed) = seed_override()? {
        config.base_seed = seed;
    }
    if let Some(w) = args.workers {
        if w == 0 {
            return Err(usage("--workers must be at least 1"));
        }
        config.workers = Some(w);
    }

    let cells = config.cells();
    let total_trials = cells.len() as u64 * config.trials as u64;
    let total_periods: u64 = cells
        .iter()
        .map(|&(_, _, t)| t * config.trials as u64)
        .sum();
    println!("sweep      = {}", config.name);
    println!("instance   = {}", config.instance.name());
    println!(
        "grid       = {} policies x {} lambdas x {} horizons = {} cells",
        config.policies.len(),
        config.lambdas.len(),
        config.horizons.len(),
        cells.len()
    );
    println!("trials     = {} per cell, {} total", config.trials, total_trials);
    println!("periods    = {total_periods} simulated in total");
    if args.dry_run {
        println!("dry run: nothing executed, nothing written");
        return Ok(ExitCode::SUCCESS);
    }

    std::fs::create_dir_all(&args.out)
        .with_context(|| format!("creating {}", args.out.display()))?;
    let results_path = args.out.join("results.csv");
    let slopes_path = args.out.join("slopes.csv");
    let manifest_path = args.out.join("manifest.json");
    refuse_overwrite(
        &[
            results_path.clone(),
            slopes_path.clone(),
            manifest_path.clone(),
        ],
        args.force,
    )?;

    let results = run_sweep(&config)?;
    let mut fits: Vec<SlopeFit> = Vec::new();
    for &policy in &config.policies {
        for &lambda in &config.lambdas {
            for metric in [SlopeMetric::Regret, SlopeMetric::PenalizedRegret] {
                // A fit needs >= 3 usable horizons; skip series that are too
                // short or entirely failed rather than aborting the sweep.
                if let Ok(fit) = fit_slope(&results, policy, lambda, metric) {
                    fits.push(fit);
                }
            }
        }
    }
    write_results_csv(&results, &results_path)?;
    write_slopes_csv(&fits, &slopes_path)?;
    write_manifest_json(&config, &manifest_path)?;

    let failed = results.iter().filter(|c| c.error.is_some()).count();
    println!("cells done = {} ({} with errors)", results.len(), failed);
    println!("wrote {}", results_path.display());
    println!("wrote {}", slopes_path.display());
    println!("wrote {}", manifest_path.display());
    Ok(ExitCode::SUCCESS)
}

fn cmd_verify_lb(args: VerifyLbArgs) -> Result<ExitCode> {
    let (a_lo, a_hi) = HARD_A_RANGE;
    if !args.a.is_finite() || !(a_lo..=a_hi).contains(&args.a) {
        return Err(usage(format!(
            "--A must lie in [{a_lo}, {a_hi}], got {}",
            args.a
        )));
    }
    if !args.h.is_finite() || !(args.h > 0.0 && args.h < HARD_H_MAX) {
        return Err(usage(format!(
            "--h must lie in (0, {HARD_H_MAX}), got {}",
            args.h
        )));
    }
    let report = verify_lb_properties(args.a, args.h, args.grid_step)?;
    println!(
        "hard pair A = {}, h = {}, grid step = {}",
        report.a, report.h, report.grid_step
    );
    for item in &report.items {
        println!(
            "{} {:<28} observed {:>14.8e}  bound {:>14.8e}  ({})",
            if item.pass { "PASS" } else { "FAIL" },
            item.label,
            item.observed,
            item.bound,
            item.detail
        );
    }
    if report.all_pass() {
        println!("all {} checks passed", report.items.len());
        Ok(ExitCode::SUCCESS)
    } else {
        let failed = report.items.iter().filter(|i| !i.pass).count();
        println!("{failed} of {} checks failed", report.items.len());
        Ok(ExitCode::from(1))
    }
}

fn cmd_oracle(args: OracleArgs) -> Result<ExitCode> {
    let instance = catalog::by_name(&args.instance)?;
    let measure = match args.measure {
        MeasureArg::Price => FairnessMeasure::price(&instance),
        MeasureArg::Demand => FairnessMeasure::demand(),
    };
    let spec = FairnessSpec::new(measure, args.lambda, ConstraintMode::Hard, None)?;
    let solution = match args.brute_step {
        None => oracle::solve(&instance, &spec, &OracleOptions::default())?,
        Some(step) => {
            if !(step > 0.0) || !step.is_finite() {
                return Err(usage(format!("--brute-step must be > 0, got {step}")));
            }
            let options = OracleOptions {
                grid_step: step,
                ..OracleOptions::default()
            };
            oracle::brute_force_constrained(&instance, &spec, &options)?
        }
    };
    println!("{}", serde_json::to_string_pretty(&solution)?);
    Ok(ExitCode::SUCCESS)
}
