//! Simulation library for fairness-constrained dynamic pricing with demand
//! learning.
//!
//! A seller posts one price per customer group each period, observes noisy
//! demand, and is scored against a clairvoyant that knows the true demand
//! curves. Relative fairness caps how far the groups' prices (or demands, or a
//! custom discrepancy of either) may drift apart: a tolerance `lambda in [0,1]`
//! scales the gap the unconstrained group optima would induce, so `lambda = 0`
//! forces parity and `lambda = 1` leaves pricing unconstrained.
//!
//! The crate provides:
//!
//! * [`demand`] — demand-curve families, market instances, sampling noise, and
//!   the hard-instance pair used by the lower-bound verifier;
//! * [`measure`] — fairness measures, discrepancy functions, and the fairness
//!   specification (hard cap vs. soft penalty);
//! * [`oracle`] — clairvoyant solvers: unconstrained optima, structure-aware
//!   constrained solvers, and an exhaustive grid oracle for cross-checks;
//! * [`schedule`] — exploration budgets (trisection counts, checkpoint counts,
//!   stopping widths) with analysis-form and desk-scale constants;
//! * [`policy`] — explore-then-commit pricing policies and same-price
//!   baselines;
//! * [`env`] / [`trace`] — the simulated market loop with per-period regret,
//!   penalty, and violation accounting;
//! * [`sim`] — single-trial driver and violation-rate statistics;
//! * [`experiment`] — seeded sweep runner with deterministic parallel
//!   aggregation and log-log regret-slope fits;
//! * [`catalog`] / [`config`] — built-in instances and the flat key/value
//!   config format used by the CLI.

pub mod catalog;
pub mod config;
pub mod demand;
pub mod env;
pub mod error;
pub mod experiment;
pub(crate) mod grid;
pub mod measure;
pub mod oracle;
pub mod policy;
pub mod schedule;
pub mod sim;
pub mod trace;

pub use demand::{DemandCurve, DemandKind, MarketInstance, NoiseModel, PriceInterval};
pub use error::Error;
pub use measure::{ConstraintMode, DiscrepancyFunction, FairnessMeasure, FairnessSpec};
pub use oracle::{ClairvoyantSolution, OracleOptions};
pub use policy::PolicyKind;
pub use schedule::ExplorationSchedule;
pub use sim::{run_trial, violation_rate, TrialSetup};
pub use trace::{TraceOptions, TrialTrace};
