//! Clairvoyant benchmarks: per-group unconstrained optima and the
//! fairness-constrained joint optimum, computed from the true demand curves.
//!
//! Two solver families coexist:
//! - structure-aware searches (golden-section / windowed line search) for the
//!   common case of regular curves under a hard price constraint, and
//! - an exact grid brute force that handles every measure, discrepancy
//!   function, and regularity combination, used both as the fallback solver
//!   and as the cross-check in tests.

use serde::{Deserialize, Serialize};

use crate::demand::MarketInstance;
use crate::error::{Error, Result};
use crate::grid::{self, RangeMax, TIE_EPS};
use crate::measure::{FairnessSpec, MeasureKind};

const INV_PHI: f64 = 0.618_033_988_749_894_8;

/// Tuning knobs for the clairvoyant solvers.
#[derive(Debug, Clone, Copy)]
pub struct OracleOptions {
    /// Target price accuracy of bracketing searches (also the exhaustive grid
    /// step for non-regular curves).
    pub tol: f64,
    /// Grid step of [`brute_force_constrained`].
    pub grid_step: f64,
}

impl Default for OracleOptions {
    fn default() -> Self {
        OracleOptions {
            tol: 1e-6,
            grid_step: 1e-3,
        }
    }
}

/// The clairvoyant answer for one `(instance, fairness)` pair: per-group
/// unconstrained optima `p_sharp`, the constrained joint optimum `p_star`,
/// and the disparity allowance those generate.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ClairvoyantSolution {
    /// Per-group unconstrained revenue-optimal prices.
    pub p_sharp: Vec<f64>,
    /// Constrained joint optimum.
    pub p_star: Vec<f64>,
    /// Total expected revenue at `p_sharp` (groups optimized separately).
    pub revenue_sharp: f64,
    /// Total expected revenue at `p_star`.
    pub revenue_star: f64,
    /// Disparity of the unconstrained benchmark (measure or discrepancy
    /// units); the constraint allows committed gaps up to `lambda` times it.
    pub gap_sharp: f64,
    pub lambda: f64,
}

// ---------------------------------------------------------------------------
// 1-D maximization helpers
// ---------------------------------------------------------------------------

/// Golden-section maximization of a unimodal `f` on `[lo, hi]` to within
/// `tol`. Falls back to a fine grid scan if the bracket fails to shrink
/// (defensive; cannot trigger for genuinely unimodal functions).
fn golden_max(f: &dyn Fn(f64) -> f64, lo: f64, hi: f64, tol: f64) -> (f64, f64) {
    let (mut a, mut b) = (lo, hi);
    let mut c = b - INV_PHI * (b - a);
    let mut d = a + INV_PHI * (b - a);
    let (mut fc, mut fd) = (f(c), f(d));
    for _ in 0..200 {
        if b - a <= tol {
            break;
        }
        if fc >= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - INV_PHI * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + INV_PHI * (b - a);
            fd = f(d);
        }
    }
    let x = 0.5 * (a + b);
    (x, f(x))
}

/// Maximize over `[lo, hi]`: coarse grid to localize the mode, golden-section
/// to polish, and a defensive comparison against the coarse scan so a
/// mis-bracketed mode can never win.
fn unimodal_max(f: &dyn Fn(f64) -> f64, lo: f64, hi: f64, tol: f64) -> (f64, f64) {
    let coarse = grid::price_grid(lo, hi, (100.0 * tol).min((hi - lo) / 8.0));
    let vals: Vec<f64> = coarse.iter().map(|&p| f(p)).collect();
    let k = grid::argmax(&vals);
    let a = if k == 0 { coarse[0] } else { coarse[k - 1] };
    let b = if k + 1 == coarse.len() {
        coarse[k]
    } else {
        coarse[k + 1]
    };
    let (x, fx) = golden_max(f, a, b, tol);
    if vals[k] > fx + TIE_EPS {
        (coarse[k], vals[k])
    } else {
        (x, fx)
    }
}

/// Exhaustive grid maximization with first-index tie-breaking.
fn grid_max(f: &dyn Fn(f64) -> f64, lo: f64, hi: f64, step: f64) -> (f64, f64) {
    let ps = grid::price_grid(lo, hi, step);
    let vals: Vec<f64> = ps.iter().map(|&p| f(p)).collect();
    let k = grid::argmax(&vals);
    (ps[k], vals[k])
}

// ---------------------------------------------------------------------------
// Unconstrained optimum
// ---------------------------------------------------------------------------

/// Per-group unconstrained revenue maximizers and the revenue they earn.
/// Regular curves use the bracketing search; non-regular ones an exhaustive
/// grid of step `tol` (their revenue may plateau, and the grid's first-index
/// tie rule picks the lowest optimal price).
pub fn unconstrained_optimum(
    instance: &MarketInstance,
    opts: &OracleOptions,
) -> (Vec<f64>, Vec<f64>) {
    let dom = instance.domain();
    let mut prices = Vec::with_capacity(instance.groups());
    let mut revs = Vec::with_capacity(instance.groups());
    for z in 0..instance.groups() {
        let f = |p: f64| instance.revenue(z, p);
        let (p, r) = if instance.curve(z).is_regular() {
            unimodal_max(&f, dom.lo, dom.hi, opts.tol)
        } else {
            grid_max(&f, dom.lo, dom.hi, opts.tol)
        };
        prices.push(p);
        revs.push(r);
    }
    (prices, revs)
}

/// Disparity of the unconstrained benchmark under a given spec.
fn sharp_gap(instance: &MarketInstance, spec: &FairnessSpec, p_sharp: &[f64]) -> f64 {
    let demands: Vec<f64> = p_sharp
        .iter()
        .enumerate()
        .map(|(z, &p)| instance.demand(z, p))
        .collect();
    spec.gap(p_sharp, &demands)
}

// ---------------------------------------------------------------------------
// Constrained optimum: structure-aware paths
// ---------------------------------------------------------------------------

/// Two-group constrained optimum under a hard price constraint with regular
/// curves: the binding gap is `g = lambda * |p1# - p2#|`, the lower price
/// goes to the group with the smaller unconstrained optimum, and the joint
/// revenue `R_a(x) + R_b(x + g)` is unimodal in the lower price `x`.
fn constrained_pair_optimum(
    instance: &MarketInstance,
    spec: &FairnessSpec,
    p_sharp: &[f64],
    opts: &OracleOptions,
) -> Result<(Vec<f64>, f64)> {
    debug_assert_eq!(instance.groups(), 2);
    let dom = instance.domain();
    let g = spec.lambda * (p_sharp[0] - p_sharp[1]).abs();
    let (lo_group, hi_group) = if p_sharp[0] <= p_sharp[1] { (0, 1) } else { (1, 0) };
    let f = |x: f64| instance.revenue(lo_group, x) + instance.revenue(hi_group, x + g);
    let (x, _) = unimodal_max(&f, dom.lo, dom.hi - g, opts.tol);
    let mut prices = vec![0.0; 2];
    prices[lo_group] = x;
    prices[hi_group] = x + g;
    let rev = instance.total_revenue(&prices);
    Ok((prices, rev))
}

/// Multi-group constrained optimum under a hard price constraint with regular
/// curves: with allowance `g = lambda * max pairwise sharp gap`, the optimal
/// prices are each group's `p_sharp` clamped into a window `[L, L + g]`, and
/// total revenue is unimodal in the window anchor `L`. Coarse scan plus a
/// fine polish around the best coarse anchor.
fn constrained_multi_optimum(
    instance: &MarketInstance,
    spec: &FairnessSpec,
    p_sharp: &[f64],
    opts: &OracleOptions,
) -> Result<(Vec<f64>, f64)> {
    let dom = instance.domain();
    let g = {
        let mut worst = 0.0f64;
        for i in 0..p_sharp.len() {
            for j in i + 1..p_sharp.len() {
                worst = worst.max((p_sharp[i] - p_sharp[j]).abs());
            }
        }
        spec.lambda * worst
    };
    let clamped = |l: f64| -> Vec<f64> {
        p_sharp
            .iter()
            .map(|&p| p.clamp(l, (l + g).min(dom.hi)))
            .collect()
    };
    let f = |l: f64| instance.total_revenue(&clamped(l));
    let hi_anchor = (dom.hi - g).max(dom.lo);
    let coarse_step = (100.0 * opts.tol).min((hi_anchor - dom.lo).max(opts.tol) / 8.0);
    let anchors = grid::price_grid(dom.lo, hi_anchor.max(dom.lo + coarse_step), coarse_step);
    let vals: Vec<f64> = anchors.iter().map(|&l| f(l)).collect();
    let k = grid::argmax(&vals);
    let fine_lo = if k == 0 { anchors[0] } else { anchors[k - 1] };
    let fine_hi = if k + 1 == anchors.len() {
        anchors[k]
    } else {
        anchors[k + 1]
    };
    let mut best = (anchors[k], vals[k]);
    let mut l = fine_lo;
    while l <= fine_hi + 1e-15 {
        let v = f(l);
        if v > best.1 + TIE_EPS {
            best = (l, v);
        }
        l += opts.tol;
    }
    let prices = clamped(best.0);
    let rev = instance.total_revenue(&prices);
    Ok((prices, rev))
}

// ---------------------------------------------------------------------------
// Constrained optimum: exact grid brute force
// ---------------------------------------------------------------------------

/// Exact constrained optimum on a shared price grid. Handles any measure,
/// any number of groups up to 3, and two-group discrepancy functions; serves
/// as the reference the structure-aware solvers are validated against.
///
/// The search is organized around the constraint's window structure: sort the
/// grid's measure values, slide a window of width `lambda * gap_sharp` over
/// them, and pick each group's best feasible price by a sparse-table range
/// maximum — `O(N n log n)` instead of `O(n^N)`. Measures that are
/// non-monotone in price get one extra grid cell of slack on the window so a
/// `lambda = 0` constraint still admits grid-representable solutions; the
/// price measure is exact and gets none. Discrepancy-function constraints
/// fall back to an `O(n^2)` pair scan with a cost guard.
pub fn brute_force_constrained(
    instance: &MarketInstance,
    spec: &FairnessSpec,
    opts: &OracleOptions,
) -> Result<ClairvoyantSolution> {
    if opts.grid_step < 1e-4 - 1e-15 {
        return Err(Error::CostGuard(format!(
            "brute-force grid step {} below the 1e-4 cost floor",
            opts.grid_step
        )));
    }
    let n_groups = instance.groups();
    if n_groups > 3 {
        return Err(Error::CostGuard(format!(
            "brute force supports at most 3 groups, got {n_groups}"
        )));
    }
    let dom = instance.domain();
    let ps = grid::price_grid(dom.lo, dom.hi, opts.grid_step);
    let n = ps.len();

    // Grid-based per-group optima (consistent with the grid search below).
    let mut p_sharp = Vec::with_capacity(n_groups);
    let mut revenue_sharp = 0.0;
    let mut rev_cols: Vec<Vec<f64>> = Vec::with_capacity(n_groups);
    let mut meas_cols: Vec<Vec<f64>> = Vec::with_capacity(n_groups);
    for z in 0..n_groups {
        let revs: Vec<f64> = ps.iter().map(|&p| instance.revenue(z, p)).collect();
        let meas: Vec<f64> = ps
            .iter()
            .map(|&p| spec.measure.truth(p, instance.demand(z, p)))
            .collect();
        let k = grid::argmax(&revs);
        p_sharp.push(ps[k]);
        revenue_sharp += revs[k];
        rev_cols.push(revs);
        meas_cols.push(meas);
    }
    let gap_sharp = sharp_gap(instance, spec, &p_sharp);
    let allowance = spec.lambda * gap_sharp;

    if let (Some(f), 2) = (&spec.discrepancy, n_groups) {
        // O(n^2) pair scan over |f(p1, p2)| <= allowance.
        if n > 6000 {
            return Err(Error::CostGuard(format!(
                "discrepancy brute force needs {n}^2 evaluations; refine grid_step or shrink \
                 the domain"
            )));
        }
        let mut best: Option<(f64, [f64; 2])> = None;
        for (i, &p1) in ps.iter().enumerate() {
            for (j, &p2) in ps.iter().enumerate() {
                if f.eval(p1, p2).abs() <= allowance + 1e-12 {
                    let v = rev_cols[0][i] + rev_cols[1][j];
                    if best.map_or(true, |(bv, _)| v > bv + TIE_EPS) {
                        best = Some((v, [p1, p2]));
                    }
                }
            }
        }
        let (rev, prices) = best.ok_or_else(|| {
            Error::Infeasible("no grid price pair satisfies the discrepancy constraint".into())
        })?;
        return Ok(ClairvoyantSolution {
            p_sharp,
            p_star: prices.to_vec(),
            revenue_sharp,
            revenue_star: rev,
            gap_sharp,
            lambda: spec.lambda,
        });
    }

    // Window scan over measure values. Candidate anchors are all observed
    // measure values; for each anchor m, every group picks its best price
    // with measure in [m, m + width].
    let exact_measure = matches!(spec.measure.kind(), MeasureKind::Price);
    let cell_slack = if exact_measure {
        0.0
    } else {
        // One cell of measure movement so lambda = 0 stays grid-feasible.
        let mut worst = 0.0f64;
        for col in &meas_cols {
            for w in col.windows(2) {
                worst = worst.max((w[1] - w[0]).abs());
            }
        }
        worst
    };
    let width = allowance + cell_slack;

    // Per group: measure values sorted ascending with original indices, a
    // revenue array in that order, and a sparse table over it.
    let mut orders: Vec<Vec<usize>> = Vec::with_capacity(n_groups);
    let mut sorted_meas: Vec<Vec<f64>> = Vec::with_capacity(n_groups);
    let mut sorted_revs: Vec<Vec<f64>> = Vec::with_capacity(n_groups);
    for z in 0..n_groups {
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|&a, &b| meas_cols[z][a].partial_cmp(&meas_cols[z][b]).unwrap());
        sorted_meas.push(order.iter().map(|&i| meas_cols[z][i]).collect());
        sorted_revs.push(order.iter().map(|&i| rev_cols[z][i]).collect());
        orders.push(order);
    }
    let tables: Vec<RangeMax<'_>> = sorted_revs.iter().map(|v| RangeMax::new(v)).collect();

    let mut anchors: Vec<f64> = meas_cols.iter().flat_map(|c| c.iter().copied()).collect();
    anchors.sort_by(|a, b| a.partial_cmp(b).unwrap());
    anchors.dedup_by(|a, b| (*a - *b).abs() <= 1e-15);

    let mut best: Option<(f64, Vec<f64>)> = None;
    for &m in &anchors {
        let (win_lo, win_hi) = (m - 1e-12, m + width + 1e-12);
        let mut total = 0.0;
        let mut picks = Vec::with_capacity(n_groups);
        let mut feasible = true;
        for z in 0..n_groups {
            let a = sorted_meas[z].partition_point(|&x| x < win_lo);
            let b = sorted_meas[z].partition_point(|&x| x <= win_hi);
            if a >= b {
                feasible = false;
                break;
            }
            let k = tables[z].query(a, b - 1); // leftmost max in sorted order
            total += sorted_revs[z][k];
            picks.push(orders[z][k]);
        }
        if !feasible {
            continue;
        }
        if best.as_ref().map_or(true, |(bv, _)| total > bv + TIE_EPS) {
            best = Some((total, picks.iter().map(|&idx| ps[idx]).collect()));
        }
    }

    let (revenue_star, p_star) = best.ok_or_else(|| {
        Error::Infeasible("no measure window admits a feasible grid price vector".into())
    })?;
    Ok(ClairvoyantSolution {
        p_sharp,
        p_star,
        revenue_sharp,
        revenue_star,
        gap_sharp,
        lambda: spec.lambda,
    })
}

// ---------------------------------------------------------------------------
// Dispatcher
// ---------------------------------------------------------------------------

/// Clairvoyant solve: structure-aware searches when the instance is all
/// regular under a hard/soft *price* constraint without a discrepancy
/// function; exact grid brute force otherwise.
pub fn solve(
    instance: &MarketInstance,
    spec: &FairnessSpec,
    opts: &OracleOptions,
) -> Result<ClairvoyantSolution> {
    let fast_path =
        instance.all_regular() && spec.measure.is_price() && spec.discrepancy.is_none();
    if !fast_path {
        return brute_force_constrained(instance, spec, opts);
    }
    let (p_sharp, revs) = unconstrained_optimum(instance, opts);
    let revenue_sharp: f64 = revs.iter().sum();
    let gap_sharp = sharp_gap(instance, spec, &p_sharp);
    let (p_star, revenue_star) = if instance.groups() == 2 {
        constrained_pair_optimum(instance, spec, &p_sharp, opts)?
    } else {
        constrained_multi_optimum(instance, spec, &p_sharp, opts)?
    };
    Ok(ClairvoyantSolution {
        p_sharp,
        p_star,
        revenue_sharp,
        revenue_star,
        gap_sharp,
        lambda: spec.lambda,
    })
}

/// Revenue sacrificed to fairness, `revenue_sharp - revenue_star`, for each
/// `lambda` in the list. Useful for tracing the fairness-revenue frontier.
pub fn revenue_loss_curve(
    instance: &MarketInstance,
    base_spec: &FairnessSpec,
    lambdas: &[f64],
    opts: &OracleOptions,
) -> Result<Vec<(f64, f64)>> {
    let mut out = Vec::with_capacity(lambdas.len());
    for &l in lambdas {
        let mut spec = base_spec.clone();
        spec.lambda = l;
        let sol = solve(instance, &spec, opts)?;
        out.push((l, sol.revenue_sharp - sol.revenue_star));
    }
    Ok(out)
}

// ---------------------------------------------------------------------------
// Tests
// ---------------------------------------------------------------------------
