//! Experiment sweeps: policy x lambda x horizon grids of repeated trials,
//! parallel execution, aggregation, regret-slope fits, and result files.
//!
//! Reproducibility contract: a sweep's outputs are a pure function of its
//! config. Per-trial seeds are derived by a splittable mix of the base seed
//! with the cell and trial indices, trials are aggregated in trial order
//! regardless of which worker finished first, and wall-clock information
//! appears only in the manifest, never in result rows.

use std::collections::HashMap;
use std::io::Write as _;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;

use rayon::prelude::*;
use serde::Serialize;

use crate::demand::MarketInstance;
use crate::error::{Error, Result};
use crate::measure::{ConstraintMode, FairnessMeasure, FairnessSpec};
use crate::oracle::{self, ClairvoyantSolution, OracleOptions};
use crate::policy::PolicyKind;
use crate::schedule::ExplorationSchedule;
use crate::sim::{self, TrialSetup};
use crate::trace::TraceOptions;

/// Which per-group quantity sweeps constrain. Custom measures carry closures
/// and are only reachable through the library API, not sweep configs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum SweepMeasure {
    Price,
    Demand,
}

/// Full description of one sweep.
#[derive(Debug, Clone)]
pub struct SweepConfig {
    pub name: String,
    pub instance: MarketInstance,
    pub policies: Vec<PolicyKind>,
    pub lambdas: Vec<f64>,
    pub horizons: Vec<u64>,
    /// Trials per (policy, lambda, horizon) cell.
    pub trials: u32,
    pub base_seed: u64,
    pub schedule: ExplorationSchedule,
    /// Penalty weight handed to soft-mode policies.
    pub gamma: f64,
    pub measure: SweepMeasure,
    /// Worker threads; `None` uses the process-global thread pool.
    pub workers: Option<usize>,
}

impl SweepConfig {
    pub fn validate(&self) -> Result<()> {
        if self.policies.is_empty() || self.lambdas.is_empty() || self.horizons.is_empty() {
            return Err(Error::invalid(
                "sweep",
                "policies, lambdas, and horizons must each be non-empty",
            ));
        }
        if self.trials == 0 {
            return Err(Error::invalid("sweep", "trials must be at least 1"));
        }
        for &l in &self.lambdas {
            if !(0.0..=1.0).contains(&l) {
                return Err(Error::invalid("sweep", format!("lambda {l} outside [0, 1]")));
            }
        }
        for &t in &self.horizons {
            if t == 0 {
                return Err(Error::invalid("sweep", "horizons must be positive"));
            }
        }
        if self.horizons.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::invalid(
                "sweep",
                "horizons must be strictly increasing",
            ));
        }
        if !self.gamma.is_finite() || self.gamma < 0.0 {
            return Err(Error::invalid("sweep", "gamma must be finite and >= 0"));
        }
        self.schedule.validate()?;
        Ok(())
    }

    /// The fairness spec a given policy runs under at a given lambda: soft
    /// policies get the sweep's gamma, everything else the hard mode. The
    /// discrepancy policy gets the plain price-difference discrepancy (the
    /// only one a flat config can name); custom discrepancies are a
    /// library-API feature.
    pub fn spec_for(&self, policy: PolicyKind, lambda: f64) -> Result<FairnessSpec> {
        let measure = match self.measure {
            SweepMeasure::Price => FairnessMeasure::price(&self.instance),
            SweepMeasure::Demand => FairnessMeasure::demand(),
        };
        let mode = match policy {
            PolicyKind::FdpGfm | PolicyKind::FdpGfmMulti => ConstraintMode::Soft {
                gamma: self.gamma,
            },
            _ => ConstraintMode::Hard,
        };
        let discrepancy = match (policy, self.measure) {
            (PolicyKind::FdpDiscrepancy, SweepMeasure::Price) => {
                Some(crate::measure::DiscrepancyFunction::difference())
            }
            _ => None,
        };
        FairnessSpec::new(measure, lambda, mode, discrepancy)
    }

    /// Cells in declared order: policies outermost, then lambdas, horizons.
    pub fn cells(&self) -> Vec<(PolicyKind, f64, u64)> {
        let mut out = Vec::new();
        for &p in &self.policies {
            for &l in &self.lambdas {
                for &t in &self.horizons {
                    out.push((p, l, t));
                }
            }
        }
        out
    }
}

/// Aggregated outcome of one sweep cell. Per-trial seeds are recoverable as
/// `mix_seed(base_seed, cell_index, trial)` for `trial` in `0..trials`.
#[derive(Debug, Clone, Serialize)]
pub struct CellResult {
    pub cell_index: usize,
    pub policy: String,
    pub instance: String,
    pub lambda: f64,
    pub horizon: u64,
    pub trials: u32,
    pub mean_regret: f64,
    pub std_regret: f64,
    /// Standard error of the mean: `std_regret / sqrt(trials)`.
    pub stderr: f64,
    pub mean_penalty: f64,
    pub mean_penalized_regret: f64,
    /// Fraction of trials with at least one violating period.
    pub violation_trial_frac: f64,
    /// Fraction of all simulated periods in violation.
    pub violation_period_frac: f64,
    pub mean_stage_periods: [f64; 3],
    /// First failure message, if any trial errored or panicked; aggregate
    /// columns are NaN in that case.
    pub error: Option<String>,
}

impl CellResult {
    /// A cell whose aggregates are all NaN, used before trials fill them in
    /// and for cells that failed outright.
    fn empty(
        cell_index: usize,
        policy: PolicyKind,
        instance: &str,
        lambda: f64,
        horizon: u64,
        trials: u32,
    ) -> Self {
        CellResult {
            cell_index,
            policy: policy.name().to_string(),
            instance: instance.to_string(),
            lambda,
            horizon,
            trials,
            mean_regret: f64::NAN,
            std_regret: f64::NAN,
            stderr: f64::NAN,
            mean_penalty: f64::NAN,
            mean_penalized_regret: f64::NAN,
            violation_trial_frac: f64::NAN,
            violation_period_frac: f64::NAN,
            mean_stage_periods: [f64::NAN; 3],
            error: None,
        }
    }
}

/// Human-readable statement of the seed derivation, embedded in the run
/// manifest so anyone can recompute every trial seed from `base_seed`.
pub const SEED_RULE: &str = "seed = splitmix64(base_seed XOR cell_index*0x9E3779B97F4A7C15 XOR trial*0xBF58476D1CE4E5B9) where splitmix64(z): z=(z^(z>>30))*0xBF58476D1CE4E5B9; z=(z^(z>>27))*0x94D049BB133111EB; return z^(z>>31); cell_index enumerates (policy, lambda, horizon) with horizon fastest, then lambda, then policy";

/// SplitMix64 mix of base seed, cell index, and trial index. Changing any
/// single input decorrelates the output, so every trial in a sweep gets an
/// independent, reproducible RNG stream.
pub fn mix_seed(base: u64, cell: u64, trial: u64) -> u64 {
    let mut z = base
        ^ cell.wrapping_mul(0x9E37_79B9_7F4A_7C15)
        ^ trial.wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

fn run_cell(
    config: &SweepConfig,
    cell_index: usize,
    policy: PolicyKind,
    lambda: f64,
    horizon: u64,
    benchmark: &ClairvoyantSolution,
    spec: &FairnessSpec,
) -> CellResult {
    let mut result = CellResult::empty(
        cell_index,
        policy,
        config.instance.name(),
        lambda,
        horizon,
        config.trials,
    );

    // Parallel over trials, collected by index so aggregation order is
    // independent of scheduling.
    let outcomes: Vec<std::result::Result<crate::trace::TrialTrace, String>> = (0..config.trials)
        .into_par_iter()
        .map(|trial| {
            let setup = TrialSetup {
                instance: config.instance.clone(),
                spec: spec.clone(),
                policy,
                horizon,
                seed: mix_seed(config.base_seed, cell_index as u64, trial as u64),
                schedule: config.schedule,
                trace: TraceOptions {
                    full: false,
                    sample_every: 0,
                },
                oracle: OracleOptions::default(),
            };
            catch_unwind(AssertUnwindSafe(|| {
                sim::run_trial_with_benchmark(&setup, benchmark)
            }))
            .map_err(|p| {
                let msg = p
                    .downcast_ref::<&str>()
                    .map(|s| s.to_string())
                    .or_else(|| p.downcast_ref::<String>().cloned())
                    .unwrap_or_else(|| "panic".into());
                format!("trial {trial} panicked: {msg}")
            })
            .and_then(|r| r.map_err(|e| format!("trial {trial} failed: {e}")))
        })
        .collect();

    let mut traces = Vec::with_capacity(outcomes.len());
    for outcome in outcomes {
        match outcome {
            Ok(t) => traces.push(t),
            Err(e) => {
                result.error = Some(e);
                return result;
            }
        }
    }

    let n = traces.len() as f64;
    let mean_regret = traces.iter().map(|t| t.regret).sum::<f64>() / n;
    let var = if traces.len() > 1 {
        traces
            .iter()
            .map(|t| (t.regret - mean_regret).powi(2))
            .sum::<f64>()
            / (n - 1.0)
    } else {
        0.0
    };
    let (trial_frac, period_frac) = sim::violation_rate(&traces);
    result.mean_regret = mean_regret;
    result.std_regret = var.sqrt();
    result.stderr = result.std_regret / n.sqrt();
    result.mean_penalty = traces.iter().map(|t| t.penalty).sum::<f64>() / n;
    result.mean_penalized_regret =
        traces.iter().map(|t| t.penalized_regret()).sum::<f64>() / n;
    result.violation_trial_frac = trial_frac;
    result.violation_period_frac = period_frac;
    for s in 0..3 {
        result.mean_stage_periods[s] =
            traces.iter().map(|t| t.stage_periods[s] as f64).sum::<f64>() / n;
    }
    result
}

/// Runs every cell of the sweep. Benchmarks are solved once per
/// `(policy-mode, lambda)` pair and shared across horizons and trials.
pub fn run_sweep(config: &SweepConfig) -> Result<Vec<CellResult>> {
    config.validate()?;
    let cells = config.cells();

    // Benchmark cache: the clairvoyant solution depends only on the measure
    // and lambda (the solver treats the constraint as binding), so key by
    // lambda bits. Solve failures surface per cell below.
    let mut benchmarks: HashMap<u64, ClairvoyantSolution> = HashMap::new();
    let mut solve_errors: HashMap<u64, String> = HashMap::new();
    for &(policy, lambda, _) in &cells {
        let key = lambda.to_bits();
        if benchmarks.contains_key(&key) || solve_errors.contains_key(&key) {
            continue;
        }
        let spec = config.spec_for(policy, lambda)?;
        match oracle::solve(&config.instance, &spec, &OracleOptions::default()) {
            Ok(b) => {
                benchmarks.insert(key, b);
            }
            Err(e) => {
                solve_errors.insert(key, e.to_string());
            }
        }
    }

    let run_all = || -> Result<Vec<CellResult>> {
        cells
            .iter()
            .enumerate()
            .map(|(idx, &(policy, lambda, horizon))| {
                let key = lambda.to_bits();
                if let Some(e) = solve_errors.get(&key) {
                    let mut cell = CellResult::empty(
                        idx,
                        policy,
                        config.instance.name(),
                        lambda,
                        horizon,
                        config.trials,
                    );
                    cell.error = Some(format!("benchmark solve failed: {e}"));
                    return Ok(cell);
                }
                let spec = config.spec_for(policy, lambda)?;
                Ok(run_cell(
                    config,
                    idx,
                    policy,
                    lambda,
                    horizon,
                    &benchmarks[&key],
                    &spec,
                ))
            })
            .collect()
    };

    match config.workers {
        Some(w) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(w.max(1))
                .build()
                .map_err(|e| Error::invalid("workers", e.to_string()))?;
            pool.install(run_all)
        }
        None => run_all(),
    }
}

// ---------------------------------------------------------------------------
// Slope fits
// ---------------------------------------------------------------------------

/// Which aggregate a slope fit regresses on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum SlopeMetric {
    Regret,
    PenalizedRegret,
}

impl SlopeMetric {
    pub fn name(self) -> &'static str {
        match self {
            SlopeMetric::Regret => "regret",
            SlopeMetric::PenalizedRegret => "penalized_regret",
        }
    }
}

/// Least-squares fit of `ln(mean metric)` against `ln T` for one
/// (policy, lambda) series.
#[derive(Debug, Clone, Serialize)]
pub struct SlopeFit {
    pub policy: String,
    pub instance: String,
    pub lambda: f64,
    pub metric: &'static str,
    /// Fitted exponent: mean metric ~ T^slope.
    pub slope: f64,
    pub intercept: f64,
    pub r_squared: f64,
    /// The fitted `(ln T, ln mean)` points, in increasing-horizon order.
    pub points: Vec<(f64, f64)>,
    /// Cells excluded for a nonpositive mean (their log is undefined).
    pub dropped: usize,
}

/// Fits the growth exponent of one (policy, lambda) series across horizons.
/// Cells with errors or nonpositive means are dropped and counted; at least
/// three usable points are required for a fit.
pub fn fit_slope(
    results: &[CellResult],
    policy: PolicyKind,
    lambda: f64,
    metric: SlopeMetric,
) -> Result<SlopeFit> {
    let mut instance = String::new();
    let mut dropped = 0usize;
    let mut pts: Vec<(f64, f64)> = Vec::new();
    for c in results {
        if c.policy != policy.name() || c.lambda != lambda {
            continue;
        }
        instance = c.instance.clone();
        let y = match metric {
            SlopeMetric::Regret => c.mean_regret,
            SlopeMetric::PenalizedRegret => c.mean_penalized_regret,
        };
        if c.error.is_some() || !(y > 0.0) {
            dropped += 1;
            continue;
        }
        pts.push(((c.horizon as f64).ln(), y.ln()));
    }
    pts.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
    pts.dedup_by(|a, b| a.0 == b.0);
    if pts.len() < 3 {
        return Err(Error::invalid(
            "slope fit",
            format!(
                "need >= 3 horizons with positive mean {} for {} at lambda {}, got {}",
                metric.name(),
                policy.name(),
                lambda,
                pts.len()
            ),
        ));
    }
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let syy: f64 = pts.iter().map(|p| (p.1 - my).powi(2)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let r_squared = if syy > 0.0 { (sxy * sxy) / (sxx * syy) } else { 1.0 };
    Ok(SlopeFit {
        policy: policy.name().to_string(),
        instance,
        lambda,
        metric: metric.name(),
        slope,
        intercept,
        r_squared,
        points: pts,
        dropped,
    })
}

// ---------------------------------------------------------------------------
// Output files
// ---------------------------------------------------------------------------

/// One row per cell; deterministic given the config. The first ten columns
/// are the stable plotting interface; diagnostics follow.
pub fn write_results_csv(results: &[CellResult], path: &Path) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record([
        "policy",
        "instance",
        "lambda",
        "T",
        "trials",
        "mean_regret",
        "std_regret",
        "stderr",
        "mean_penalized_regret",
        "violation_trial_frac",
        "mean_penalty",
        "violation_period_frac",
        "stage1_mean_periods",
        "stage2_mean_periods",
        "stage3_mean_periods",
        "error",
    ])?;
    for c in results {
        w.write_record([
            c.policy.clone(),
            c.instance.clone(),
            format!("{}", c.lambda),
            c.horizon.to_string(),
            c.trials.to_string(),
            format!("{:.6}", c.mean_regret),
            format!("{:.6}", c.std_regret),
            format!("{:.6}", c.stderr),
            format!("{:.6}", c.mean_penalized_regret),
            format!("{:.4}", c.violation_trial_frac),
            format!("{:.6}", c.mean_penalty),
            format!("{:.6}", c.violation_period_frac),
            format!("{:.1}", c.mean_stage_periods[0]),
            format!("{:.1}", c.mean_stage_periods[1]),
            format!("{:.1}", c.mean_stage_periods[2]),
            c.error.clone().unwrap_or_default(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// One row per fitted series.
pub fn write_slopes_csv(fits: &[SlopeFit], path: &Path) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record([
        "policy",
        "instance",
        "lambda",
        "slope",
        "intercept",
        "r2",
        "metric",
        "points",
        "dropped",
    ])?;
    for f in fits {
        w.write_record([
            f.policy.clone(),
            f.instance.clone(),
            format!("{}", f.lambda),
            format!("{:.4}", f.slope),
            format!("{:.4}", f.intercept),
            format!("{:.4}", f.r_squared),
            f.metric.to_string(),
            f.points.len().to_string(),
            f.dropped.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// Run manifest: the resolved configuration, the seed-derivation rule with
/// each cell's first trial seed, and the only timestamp in any output file.
pub fn write_manifest_json(config: &SweepConfig, path: &Path) -> Result<()> {
    #[derive(Serialize)]
    struct ManifestCell {
        cell_index: usize,
        policy: &'static str,
        lambda: f64,
        horizon: u64,
        first_seed: u64,
    }
    #[derive(Serialize)]
    struct Manifest<'a> {
        sweep: &'a str,
        instance: &'a str,
        groups: usize,
        policies: Vec<&'static str>,
        lambdas: &'a [f64],
        horizons: &'a [u64],
        trials: u32,
        base_seed: u64,
        seed_rule: &'static str,
        gamma: f64,
        measure: SweepMeasure,
        schedule: &'a ExplorationSchedule,
        workers: Option<usize>,
        cells: Vec<ManifestCell>,
        unix_time_secs: u64,
    }
    let cells = config
        .cells()
        .into_iter()
        .enumerate()
        .map(|(idx, (policy, lambda, horizon))| ManifestCell {
            cell_index: idx,
            policy: policy.name(),
            lambda,
            horizon,
            first_seed: mix_seed(config.base_seed, idx as u64, 0),
        })
        .collect();
    let m = Manifest {
        sweep: &config.name,
        instance: config.instance.name(),
        groups: config.instance.groups(),
        policies: config.policies.iter().map(|p| p.name()).collect(),
        lambdas: &config.lambdas,
        horizons: &config.horizons,
        trials: config.trials,
        base_seed: config.base_seed,
        seed_rule: SEED_RULE,
        gamma: config.gamma,
        measure: config.measure,
        schedule: &config.schedule,
        workers: config.workers,
        cells,
        unix_time_secs: std::time::SystemTime::now()
            .duration_since(std::time::UNIX_EPOCH)
            .map(|d| d.as_secs())
            .unwrap_or(0),
    };
    let mut f = std::fs::File::create(path)?;
    f.write_all(serde_json::to_string_pretty(&m)?.as_bytes())?;
    f.write_all(b"\n")?;
    Ok(())
}

// ---------------------------------------------------------------------------
// Tests
// ---------------------------------------------------------------------------

#[cfg(test)]
mod tests {
    use super::*;
    use crate::demand::{DemandCurve, DemandKind, NoiseModel, PriceInterval};

    fn tiny_sweep() -> SweepConfig {
        let inst = MarketInstance::new(
            "pair",
            vec![
                DemandCurve::new(DemandKind::Linear {
                    slope: -0.1,
                    intercept: 0.6,
                })
                .unwrap(),
                DemandCurve::new(DemandKind::Linear {
                    slope: -0.1,
                    intercept: 0.8,
                })
                .unwrap(),
            ],
            PriceInterval::new(0.0, 5.0).unwrap(),
            0.0,
            NoiseModel::Bernoulli,
        )
        .unwrap();
        SweepConfig {
            name: "tiny".into(),
            instance: inst,
            policies: vec![PolicyKind::FdpDl, PolicyKind::BaselineEtc],
            lambdas: vec![0.5],
            horizons: vec![500, 1_000, 2_000],
            trials: 4,
            base_seed: 7,
            schedule: ExplorationSchedule::default(),
            gamma: 1.0,
            measure: SweepMeasure::Price,
            workers: Some(2),
        }
    }

    #[test]
    fn seed_mixing_separates_cells_and_trials() {
        let a = mix_seed(1, 0, 0);
        assert_ne!(a, mix_seed(1, 0, 1));
        assert_ne!(a, mix_seed(1, 1, 0));
        assert_ne!(a, mix_seed(2, 0, 0));
        // Pure function of its inputs.
        assert_eq!(a, mix_seed(1, 0, 0));
    }

    #[test]
    fn sweep_results_are_deterministic_across_worker_counts() {
        let mut config = tiny_sweep();
        let one = run_sweep(&config).unwrap();
        config.workers = Some(4);
        let four = run_sweep(&config).unwrap();
        assert_eq!(one.len(), 6); // 2 policies x 1 lambda x 3 horizons
        for (a, b) in one.iter().zip(&four) {
            assert_eq!(a.mean_regret.to_bits(), b.mean_regret.to_bits());
            assert_eq!(a.std_regret.to_bits(), b.std_regret.to_bits());
            assert_eq!(
                a.violation_period_frac.to_bits(),
                b.violation_period_frac.to_bits()
            );
            assert!(a.error.is_none());
        }
    }

    #[test]
    fn cell_order_follows_declaration_order() {
        let config = tiny_sweep();
        let cells = config.cells();
        assert_eq!(cells[0], (PolicyKind::FdpDl, 0.5, 500));
        assert_eq!(cells[1], (PolicyKind::FdpDl, 0.5, 1_000));
        assert_eq!(cells[2], (PolicyKind::FdpDl, 0.5, 2_000));
        assert_eq!(cells[3], (PolicyKind::BaselineEtc, 0.5, 500));
    }

    #[test]
    fn slope_fit_recovers_a_known_exponent() {
        // Synthetic cells with mean_regret = 2 T^{0.8} exactly.
        let results: Vec<CellResult> = [1_000u64, 10_000, 100_000]
            .iter()
            .enumerate()
            .map(|(i, &t)| {
                let mut c = CellResult::empty(i, PolicyKind::FdpDl, "synthetic", 0.5, t, 1);
                c.mean_regret = 2.0 * (t as f64).powf(0.8);
                c.std_regret = 0.0;
                c.stderr = 0.0;
                c.mean_penalty = 0.0;
                c.mean_penalized_regret = c.mean_regret;
                c.violation_trial_frac = 0.0;
                c.violation_period_frac = 0.0;
                c.mean_stage_periods = [0.0; 3];
                c
            })
            .collect();
        let fit = fit_slope(&results, PolicyKind::FdpDl, 0.5, SlopeMetric::Regret).unwrap();
        assert!((fit.slope - 0.8).abs() < 1e-12);
        assert!((fit.intercept - 2.0f64.ln()).abs() < 1e-12);
        assert!((fit.r_squared - 1.0).abs() < 1e-12);
        assert_eq!(fit.points.len(), 3);
        assert_eq!(fit.dropped, 0);
        assert_eq!(fit.instance, "synthetic");
        // Points are (ln T, ln mean regret) sorted by ln T.
        assert!((fit.points[0].0 - 1_000f64.ln()).abs() < 1e-12);
        assert!((fit.points[2].1 - (2.0 * 100_000f64.powf(0.8)).ln()).abs() < 1e-12);
        // Fewer than three usable points cannot be fitted.
        assert!(fit_slope(&results[..2], PolicyKind::FdpDl, 0.5, SlopeMetric::Regret).is_err());
    }

    #[test]
    fn slope_fit_counts_dropped_cells() {
        let mut results: Vec<CellResult> = [1_000u64, 10_000, 100_000, 1_000_000]
            .iter()
            .enumerate()
            .map(|(i, &t)| {
                let mut c = CellResult::empty(i, PolicyKind::FdpDl, "synthetic", 0.5, t, 1);
                c.mean_regret = (t as f64).powf(0.8);
                c.mean_penalized_regret = c.mean_regret;
                c
            })
            .collect();
        results[3].error = Some("boom".into());
        let fit = fit_slope(&results, PolicyKind::FdpDl, 0.5, SlopeMetric::Regret).unwrap();
        assert_eq!(fit.points.len(), 3);
        assert_eq!(fit.dropped, 1);
        assert!((fit.slope - 0.8).abs() < 1e-12);
    }

    #[test]
    fn result_files_round_trip() {
        let config = tiny_sweep();
        let results = run_sweep(&config).unwrap();
        let dir = tempfile::tempdir().unwrap();

        let rpath = dir.path().join("results.csv");
        write_results_csv(&results, &rpath).unwrap();
        let text = std::fs::read_to_string(&rpath).unwrap();
        assert_eq!(text.lines().count(), 1 + results.len());
        assert!(text.lines().next().unwrap().starts_with(
            "policy,instance,lambda,T,trials,mean_regret,std_regret,stderr,\
             mean_penalized_regret,violation_trial_frac"
        ));

        let fit =
            fit_slope(&results, PolicyKind::BaselineEtc, 0.5, SlopeMetric::Regret).unwrap();
        let spath = dir.path().join("slopes.csv");
        write_slopes_csv(&[fit], &spath).unwrap();
        let stext = std::fs::read_to_string(&spath).unwrap();
        assert_eq!(stext.lines().count(), 2);
        assert!(stext
            .lines()
            .next()
            .unwrap()
            .starts_with("policy,instance,lambda,slope,intercept,r2"));

        let mpath = dir.path().join("manifest.json");
        write_manifest_json(&config, &mpath).unwrap();
        let v: serde_json::Value =
            serde_json::from_str(&std::fs::read_to_string(&mpath).unwrap()).unwrap();
        assert_eq!(v["sweep"], "tiny");
        assert_eq!(v["trials"], 4);
        assert!(v["seed_rule"].as_str().unwrap().contains("splitmix64"));
        let cells = v["cells"].as_array().unwrap();
        assert_eq!(cells.len(), 6);
        assert_eq!(
            cells[1]["first_seed"].as_u64().unwrap(),
            mix_seed(config.base_seed, 1, 0)
        );
        assert!(v["unix_time_secs"].as_u64().unwrap() > 0);
    }

    #[test]
    fn incompatible_cells_surface_errors_without_poisoning_the_sweep() {
        let mut config = tiny_sweep();
        // fdp-gfm needs soft mode; spec_for gives it soft mode, so to force a
        // per-cell error use a 2-group-only policy on a 3-group instance.
        let mk = |ic: f64| {
            DemandCurve::new(DemandKind::Linear {
                slope: -0.1,
                intercept: ic,
            })
            .unwrap()
        };
        config.instance = MarketInstance::new(
            "tri",
            vec![mk(0.6), mk(0.7), mk(0.8)],
            PriceInterval::new(0.0, 5.0).unwrap(),
            0.0,
            NoiseModel::Bernoulli,
        )
        .unwrap();
        config.policies = vec![PolicyKind::FdpDl, PolicyKind::FdpMulti];
        config.horizons = vec![500];
        let results = run_sweep(&config).unwrap();
        assert!(results[0].error.as_deref().unwrap().contains("2 groups"));
        assert!(results[0].mean_regret.is_nan());
        assert!(results[1].error.is_none());
        assert!(results[1].mean_regret.is_finite());
    }

    #[test]
    fn sweep_validation_rejects_degenerate_grids() {
        let mut config = tiny_sweep();
        config.trials = 0;
        assert!(config.validate().is_err());
        let mut config = tiny_sweep();
        config.lambdas = vec![1.5];
        assert!(config.validate().is_err());
        let mut config = tiny_sweep();
        config.horizons = vec![];
        assert!(config.validate().is_err());
    }
}
