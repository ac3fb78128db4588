//! Fairness measures, discrepancy functions, and the fairness specification
//! that policies and the accounting layer share.
//!
//! The constraint always has the form "committed cross-group disparity is at
//! most `lambda` times the unconstrained benchmark's disparity". `lambda = 1`
//! leaves groups free to receive their individually optimal prices;
//! `lambda = 0` forces an identical measure value across groups.

use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::demand::MarketInstance;
use crate::error::{Error, Result};

// ---------------------------------------------------------------------------
// Fairness measure
// ---------------------------------------------------------------------------

/// What per-group quantity the fairness constraint compares.
#[derive(Clone)]
pub enum MeasureKind {
    /// The posted price itself.
    Price,
    /// The demand (sale probability) induced by the posted price.
    Demand,
    /// Arbitrary map `(price, demand) -> value`; assumed 1-Lipschitz in price
    /// after normalization by `bound`.
    Custom {
        label: String,
        f: Arc<dyn Fn(f64, f64) -> f64 + Send + Sync>,
    },
}

impl fmt::Debug for MeasureKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            MeasureKind::Price => write!(f, "Price"),
            MeasureKind::Demand => write!(f, "Demand"),
            MeasureKind::Custom { label, .. } => write!(f, "Custom({label})"),
        }
    }
}

impl PartialEq for MeasureKind {
    fn eq(&self, other: &Self) -> bool {
        match (self, other) {
            (MeasureKind::Price, MeasureKind::Price) => true,
            (MeasureKind::Demand, MeasureKind::Demand) => true,
            (MeasureKind::Custom { label: a, .. }, MeasureKind::Custom { label: b, .. }) => a == b,
            _ => false,
        }
    }
}

/// A fairness measure: the compared quantity plus its a-priori range bound,
/// used to clamp observations and to scale exploration windows.
#[derive(Debug, Clone)]
pub struct FairnessMeasure {
    kind: MeasureKind,
    bound: f64,
}

impl FairnessMeasure {
    /// Price measure with bound `max(1, domain.hi)`.
    pub fn price(instance: &MarketInstance) -> Self {
        FairnessMeasure {
            kind: MeasureKind::Price,
            bound: instance.domain().hi.max(1.0),
        }
    }

    /// Demand measure; demand lives in `[0, 1]` so the bound is 1.
    pub fn demand() -> Self {
        FairnessMeasure {
            kind: MeasureKind::Demand,
            bound: 1.0,
        }
    }

    pub fn custom(
        label: impl Into<String>,
        bound: f64,
        f: impl Fn(f64, f64) -> f64 + Send + Sync + 'static,
    ) -> Result<Self> {
        if !bound.is_finite() || bound <= 0.0 {
            return Err(Error::invalid("measure bound", "must be finite and > 0"));
        }
        Ok(FairnessMeasure {
            kind: MeasureKind::Custom {
                label: label.into(),
                f: Arc::new(f),
            },
            bound,
        })
    }

    pub fn kind(&self) -> &MeasureKind {
        &self.kind
    }

    pub fn is_price(&self) -> bool {
        matches!(self.kind, MeasureKind::Price)
    }

    pub fn bound(&self) -> f64 {
        self.bound
    }

    /// Measure value under the *true* expected demand, clamped to
    /// `[0, bound]`.
    pub fn truth(&self, price: f64, expected_demand: f64) -> f64 {
        self.apply(price, expected_demand)
    }

    /// Measure value under a *realized* (sampled) demand — what a policy can
    /// actually observe period by period.
    pub fn observe(&self, price: f64, realized_demand: f64) -> f64 {
        self.apply(price, realized_demand)
    }

    fn apply(&self, price: f64, demand: f64) -> f64 {
        let raw = match &self.kind {
            MeasureKind::Price => price,
            MeasureKind::Demand => demand,
            MeasureKind::Custom { f, .. } => f(price, demand),
        };
        raw.clamp(0.0, self.bound)
    }
}

impl Default for FairnessMeasure {
    fn default() -> Self {
        FairnessMeasure {
            kind: MeasureKind::Price,
            bound: 1.0,
        }
    }
}

// ---------------------------------------------------------------------------
// Discrepancy function
// ---------------------------------------------------------------------------

/// Functional form of a two-group price discrepancy `f(p1, p2)` with
/// `f(p, p) = 0`.
#[derive(Clone)]
pub enum DiscrepancyKind {
    /// `f(p1, p2) = p1 - p2`.
    Difference,
    /// `f(p1, p2) = ln((p1 + epsilon) / (p2 + epsilon))`.
    LogRatio { epsilon: f64 },
    /// Arbitrary user map; inverted numerically.
    Custom {
        label: String,
        f: Arc<dyn Fn(f64, f64) -> f64 + Send + Sync>,
    },
}

impl fmt::Debug for DiscrepancyKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            DiscrepancyKind::Difference => write!(f, "Difference"),
            DiscrepancyKind::LogRatio { epsilon } => write!(f, "LogRatio(eps={epsilon})"),
            DiscrepancyKind::Custom { label, .. } => write!(f, "Custom({label})"),
        }
    }
}

/// A discrepancy function together with its Lipschitz constant in each price
/// argument (used to scale the exploration slack).
#[derive(Debug, Clone)]
pub struct DiscrepancyFunction {
    kind: DiscrepancyKind,
    lipschitz: f64,
}

impl DiscrepancyFunction {
    pub fn difference() -> Self {
        DiscrepancyFunction {
            kind: DiscrepancyKind::Difference,
            lipschitz: 1.0,
        }
    }

    /// Log-ratio discrepancy. Its price-derivative is `1 / (p + epsilon)`, so
    /// the stored Lipschitz constant is `max(1, 1 / (lo + epsilon))` for the
    /// given domain floor. `epsilon = 0` is fine on price domains bounded
    /// away from zero.
    pub fn log_ratio(epsilon: f64, domain_lo: f64) -> Result<Self> {
        if !epsilon.is_finite() || epsilon < 0.0 {
            return Err(Error::invalid("epsilon", "must be finite and >= 0"));
        }
        if domain_lo + epsilon <= 0.0 {
            return Err(Error::invalid("epsilon", "need domain lo + epsilon > 0"));
        }
        Ok(DiscrepancyFunction {
            kind: DiscrepancyKind::LogRatio { epsilon },
            lipschitz: (1.0 / (domain_lo + epsilon)).max(1.0),
        })
    }

    /// Custom discrepancy; `f` must vanish on the diagonal and be increasing
    /// in its first argument (spot-checked here at a few points).
    pub fn custom(
        label: impl Into<String>,
        lipschitz: f64,
        f: impl Fn(f64, f64) -> f64 + Send + Sync + 'static,
    ) -> Result<Self> {
        if !lipschitz.is_finite() || lipschitz < 1.0 {
            return Err(Error::invalid("lipschitz", "must be finite and >= 1"));
        }
        for x in [0.5, 1.0, 2.0, 5.0] {
            if f(x, x).abs() > 1e-9 {
                return Err(Error::invalid(
                    "discrepancy",
                    format!("f({x}, {x}) = {} but the diagonal must map to 0", f(x, x)),
                ));
            }
        }
        Ok(DiscrepancyFunction {
            kind: DiscrepancyKind::Custom {
                label: label.into(),
                f: Arc::new(f),
            },
            lipschitz,
        })
    }

    pub fn kind(&self) -> &DiscrepancyKind {
        &self.kind
    }

    pub fn lipschitz(&self) -> f64 {
        self.lipschitz
    }

    pub fn eval(&self, p1: f64, p2: f64) -> f64 {
        match &self.kind {
            DiscrepancyKind::Difference => p1 - p2,
            DiscrepancyKind::LogRatio { epsilon } => ((p1 + epsilon) / (p2 + epsilon)).ln(),
            DiscrepancyKind::Custom { f, .. } => f(p1, p2),
        }
    }

    /// Solves `|f(p1, p2)| = xi` for `p2 >= p1`, given the first price and a
    /// target discrepancy `xi >= 0`. `xi <= 0` returns `p1` itself (equal
    /// treatment).
    ///
    /// Closed forms for the two named kinds (which may exceed `ceiling`; the
    /// caller clamps, and a clamped pair under-shoots the target, keeping it
    /// admissible). Custom kinds bisect on `[p1, ceiling]` to 1e-9 assuming
    /// `|f(p1, .)|` grows with the second argument (true for any discrepancy
    /// monotone in the gap); a target out of reach below the ceiling returns
    /// the ceiling, and a non-finite evaluation reports infeasibility as
    /// `None`.
    pub fn inverse(&self, p1: f64, xi: f64, ceiling: f64) -> Option<f64> {
        if xi <= 0.0 {
            return Some(p1);
        }
        match &self.kind {
            DiscrepancyKind::Difference => Some(p1 + xi),
            DiscrepancyKind::LogRatio { epsilon } => Some((p1 + epsilon) * xi.exp() - epsilon),
            DiscrepancyKind::Custom { f, .. } => {
                let top = f(p1, ceiling);
                if !top.is_finite() {
                    return None;
                }
                if top.abs() < xi {
                    return Some(ceiling); // target lies beyond the ceiling
                }
                let (mut lo, mut hi) = (p1, ceiling);
                for _ in 0..200 {
                    if hi - lo <= 1e-9 {
                        break;
                    }
                    let mid = 0.5 * (lo + hi);
                    if f(p1, mid).abs() < xi {
                        lo = mid;
                    } else {
                        hi = mid;
                    }
                }
                Some(0.5 * (lo + hi))
            }
        }
    }
}

// ---------------------------------------------------------------------------
// Constraint mode + fairness spec
// ---------------------------------------------------------------------------

/// Whether the constraint binds the committed prices (hard) or only enters
/// the objective as a penalty with weight `gamma` (soft).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum ConstraintMode {
    Hard,
    Soft { gamma: f64 },
}

/// Full fairness specification for a run: measure, tightness `lambda`,
/// enforcement mode, and an optional price-discrepancy function that replaces
/// the plain price difference.
#[derive(Debug, Clone)]
pub struct FairnessSpec {
    pub measure: FairnessMeasure,
    pub lambda: f64,
    pub mode: ConstraintMode,
    pub discrepancy: Option<DiscrepancyFunction>,
}

impl FairnessSpec {
    pub fn new(
        measure: FairnessMeasure,
        lambda: f64,
        mode: ConstraintMode,
        discrepancy: Option<DiscrepancyFunction>,
    ) -> Result<Self> {
        if !(0.0..=1.0).contains(&lambda) {
            return Err(Error::invalid("lambda", format!("need 0 <= lambda <= 1, got {lambda}")));
        }
        if let ConstraintMode::Soft { gamma } = mode {
            if !gamma.is_finite() || gamma < 0.0 {
                return Err(Error::invalid("gamma", "must be finite and >= 0"));
            }
        }
        if discrepancy.is_some() && !measure.is_price() {
            return Err(Error::invalid(
                "discrepancy",
                "a discrepancy function applies to the price measure only",
            ));
        }
        Ok(FairnessSpec {
            measure,
            lambda,
            mode,
            discrepancy,
        })
    }

    /// Hard price-fairness spec, the most common configuration.
    pub fn hard_price(instance: &MarketInstance, lambda: f64) -> Result<Self> {
        FairnessSpec::new(FairnessMeasure::price(instance), lambda, ConstraintMode::Hard, None)
    }

    /// Soft spec with penalty weight `gamma` over an arbitrary measure.
    pub fn soft(measure: FairnessMeasure, lambda: f64, gamma: f64) -> Result<Self> {
        FairnessSpec::new(measure, lambda, ConstraintMode::Soft { gamma }, None)
    }

    /// Pairwise disparity of a measure-value vector: for two groups the
    /// absolute difference (or `|f(p1, p2)|` when a discrepancy function is
    /// installed), for more groups the maximum pairwise absolute difference.
    pub fn gap(&self, prices: &[f64], demands: &[f64]) -> f64 {
        if let (Some(f), 2) = (&self.discrepancy, prices.len()) {
            return f.eval(prices[0], prices[1]).abs();
        }
        let vals: Vec<f64> = prices
            .iter()
            .zip(demands)
            .map(|(&p, &d)| self.measure.truth(p, d))
            .collect();
        let mut worst = 0.0f64;
        for i in 0..vals.len() {
            for j in i + 1..vals.len() {
                worst = worst.max((vals[i] - vals[j]).abs());
            }
        }
        worst
    }

    /// Penalty weight used by regret accounting: the soft mode's `gamma`, or
    /// 1 as a diagnostic weight under hard enforcement (where violations are
    /// bugs and the penalty column should loudly expose them).
    pub fn gamma(&self) -> f64 {
        match self.mode {
            ConstraintMode::Hard => 1.0,
            ConstraintMode::Soft { gamma } => gamma,
        }
    }

    /// Whether a gap violates the constraint relative to the benchmark gap,
    /// with a fixed 1e-9 numeric tolerance.
    pub fn is_violation(&self, gap: f64, benchmark_gap: f64) -> bool {
        gap > self.lambda * benchmark_gap + 1e-9
    }

    /// One period's constraint accounting against the benchmark disparity:
    /// the realized gap (largest pairwise disparity), the penalty
    /// `gamma * sum over pairs of max(pair disparity - lambda * benchmark, 0)`,
    /// and the violation flag. Each pair's excess uses the same 1e-9 numeric
    /// tolerance as the flag, so the penalty is positive exactly when the
    /// flag is set.
    pub fn account(&self, prices: &[f64], demands: &[f64], benchmark_gap: f64) -> GapAccount {
        let allowance = self.lambda * benchmark_gap;
        let mut gap = 0.0f64;
        let mut excess_sum = 0.0f64;
        if let (Some(f), 2) = (&self.discrepancy, prices.len()) {
            gap = f.eval(prices[0], prices[1]).abs();
            let excess = gap - allowance;
            if excess > 1e-9 {
                excess_sum = excess;
            }
        } else {
            let vals: Vec<f64> = prices
                .iter()
                .zip(demands)
                .map(|(&p, &d)| self.measure.truth(p, d))
                .collect();
            for i in 0..vals.len() {
                for j in i + 1..vals.len() {
                    let pair_gap = (vals[i] - vals[j]).abs();
                    gap = gap.max(pair_gap);
                    let excess = pair_gap - allowance;
                    if excess > 1e-9 {
                        excess_sum += excess;
                    }
                }
            }
        }
        GapAccount {
            gap,
            penalty: self.gamma() * excess_sum,
            violation: gap > allowance + 1e-9,
        }
    }
}

/// One period's fairness accounting, shared by the trace recorder.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GapAccount {
    pub gap: f64,
    pub penalty: f64,
    pub violation: bool,
}

// ---------------------------------------------------------------------------
// Tests
// ---------------------------------------------------------------------------
