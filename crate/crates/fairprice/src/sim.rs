//! Single-trial simulation driver.
//!
//! Wires an instance, a fairness spec, a policy, and a schedule into one
//! reproducible trial: solve the clairvoyant benchmark, run the policy to
//! horizon exhaustion, and return the full accounting trace. Identical
//! setups with identical seeds produce bitwise-identical traces.

use crate::demand::MarketInstance;
use crate::env::Environment;
use crate::error::{Error, Result};
use crate::measure::FairnessSpec;
use crate::oracle::{self, ClairvoyantSolution, OracleOptions};
use crate::policy::PolicyKind;
use crate::schedule::ExplorationSchedule;
use crate::trace::{TraceOptions, TrialTrace};

/// Everything one trial needs.
#[derive(Debug, Clone)]
pub struct TrialSetup {
    pub instance: MarketInstance,
    pub spec: FairnessSpec,
    pub policy: PolicyKind,
    pub horizon: u64,
    pub seed: u64,
    pub schedule: ExplorationSchedule,
    pub trace: TraceOptions,
    pub oracle: OracleOptions,
}

impl TrialSetup {
    pub fn new(
        instance: MarketInstance,
        spec: FairnessSpec,
        policy: PolicyKind,
        horizon: u64,
        seed: u64,
    ) -> Self {
        TrialSetup {
            instance,
            spec,
            policy,
            horizon,
            seed,
            schedule: ExplorationSchedule::default(),
            trace: TraceOptions::default(),
            oracle: OracleOptions::default(),
        }
    }
}

/// Runs one trial end to end, solving the clairvoyant benchmark first.
pub fn run_trial(setup: &TrialSetup) -> Result<TrialTrace> {
    let benchmark = oracle::solve(&setup.instance, &setup.spec, &setup.oracle)?;
    run_trial_with_benchmark(setup, &benchmark)
}

/// Runs one trial against a precomputed benchmark (sweeps reuse one solve
/// across every seed of a cell).
pub fn run_trial_with_benchmark(
    setup: &TrialSetup,
    benchmark: &ClairvoyantSolution,
) -> Result<TrialTrace> {
    if setup.horizon == 0 {
        return Err(Error::invalid("horizon", "must be at least 1"));
    }
    setup.policy.validate(&setup.instance, &setup.spec)?;
    setup.schedule.validate()?;
    let mut env = Environment::new(
        setup.instance.clone(),
        setup.spec.clone(),
        benchmark.clone(),
        setup.horizon,
        setup.seed,
        setup.trace,
    );
    setup.policy.run(&mut env, &setup.schedule)?;
    let trace = env.finish(setup.policy.name().to_string(), setup.seed);
    debug_assert_eq!(
        trace.stage_periods.iter().sum::<u64>(),
        setup.horizon,
        "policy must spend exactly the horizon"
    );
    Ok(trace)
}

/// Violation rates over a batch of traces: the fraction of *trials* with at
/// least one violating period, and the fraction of all *periods* in
/// violation.
pub fn violation_rate(traces: &[TrialTrace]) -> (f64, f64) {
    if traces.is_empty() {
        return (0.0, 0.0);
    }
    let trials = traces.iter().filter(|t| t.had_violation()).count() as f64;
    let periods: u64 = traces.iter().map(|t| t.violation_periods).sum();
    let total: u64 = traces.iter().map(|t| t.horizon).sum();
    (trials / traces.len() as f64, periods as f64 / total as f64)
}
