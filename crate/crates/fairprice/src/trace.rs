//! Per-period traces and trial-level accounting.
//!
//! Every simulated period contributes to the cumulative tallies (regret,
//! penalty, violations, per-stage period counts); the per-period rows
//! themselves are either kept in full, subsampled, or dropped entirely
//! depending on [`TraceOptions`]. All regret accounting uses the *true*
//! expected revenue curves — sampling noise never enters the regret column.

use std::io::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::Result;

/// Which learning stage a period belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Stage {
    /// Unconstrained per-group exploration.
    Explore1,
    /// Constrained joint exploration.
    Explore2,
    /// Committed pricing until the horizon.
    Commit,
}

impl Stage {
    pub fn index(self) -> usize {
        match self {
            Stage::Explore1 => 0,
            Stage::Explore2 => 1,
            Stage::Commit => 2,
        }
    }

    /// Roman-numeral label used in CSV output.
    pub fn label(self) -> &'static str {
        match self {
            Stage::Explore1 => "I",
            Stage::Explore2 => "II",
            Stage::Commit => "III",
        }
    }
}

/// One simulated period.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PeriodRecord {
    /// 1-based period index.
    pub period: u64,
    pub stage: Stage,
    /// Posted price per group.
    pub prices: Vec<f64>,
    /// Realized demand per group.
    pub demands: Vec<f64>,
    /// Instantaneous regret against the constrained clairvoyant benchmark.
    pub regret_inc: f64,
    /// Instantaneous fairness penalty.
    pub penalty_inc: f64,
    /// Whether the period's true disparity exceeded the allowance.
    pub violation: bool,
}

/// How much per-period detail to retain.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TraceOptions {
    /// Keep every period's row.
    pub full: bool,
    /// When not `full`, keep periods with `(period - 1) % sample_every == 0`
    /// plus the final period. `0` keeps no rows at all.
    pub sample_every: u64,
}

impl Default for TraceOptions {
    fn default() -> Self {
        TraceOptions {
            full: false,
            sample_every: 1000,
        }
    }
}

impl TraceOptions {
    pub fn full() -> Self {
        TraceOptions {
            full: true,
            sample_every: 1,
        }
    }

    fn keeps(&self, period: u64, horizon: u64) -> bool {
        if self.full {
            return true;
        }
        if self.sample_every == 0 {
            return false;
        }
        (period - 1) % self.sample_every == 0 || period == horizon
    }
}

/// Complete account of one simulated trial.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TrialTrace {
    pub instance: String,
    pub policy: String,
    pub lambda: f64,
    pub seed: u64,
    pub horizon: u64,
    /// Cumulative regret against the constrained clairvoyant benchmark.
    pub regret: f64,
    /// Cumulative fairness penalty.
    pub penalty: f64,
    /// Cumulative *realized* revenue (margin times sampled demand) — a
    /// diagnostic; the regret column never uses it.
    pub realized_revenue: f64,
    /// Number of periods whose disparity exceeded the allowance.
    pub violation_periods: u64,
    /// Periods spent in each stage, indexed by [`Stage::index`].
    pub stage_periods: [u64; 3],
    /// Prices the policy committed to (empty if it never reached commitment).
    pub committed_prices: Vec<f64>,
    /// Retained per-period rows (subject to [`TraceOptions`]).
    pub records: Vec<PeriodRecord>,
    /// Order-sensitive digest of every posted price and realized demand,
    /// including periods not retained in `records`. Two runs with the same
    /// fingerprint took identical period-by-period actions.
    pub fingerprint: u64,
}

impl TrialTrace {
    /// Regret plus the cumulative fairness penalty.
    pub fn penalized_regret(&self) -> f64 {
        self.regret + self.penalty
    }

    /// Fraction of periods in violation.
    pub fn violation_fraction(&self) -> f64 {
        self.violation_periods as f64 / self.horizon as f64
    }

    pub fn had_violation(&self) -> bool {
        self.violation_periods > 0
    }

    /// Writes retained rows as CSV: one row per period, one price and demand
    /// column per group.
    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let groups = self.records.first().map_or(0, |r| r.prices.len());
        let mut w = csv::Writer::from_path(path)?;
        let mut header = vec!["period".to_string(), "stage".to_string()];
        for z in 1..=groups {
            header.push(format!("p_{z}"));
        }
        for z in 1..=groups {
            header.push(format!("D_{z}"));
        }
        header.extend(
            ["regret_inc", "penalty_inc", "violation"]
                .iter()
                .map(|s| s.to_string()),
        );
        w.write_record(&header)?;
        for r in &self.records {
            let mut row = vec![r.period.to_string(), r.stage.label().to_string()];
            row.extend(r.prices.iter().map(|p| format!("{p:.10}")));
            row.extend(r.demands.iter().map(|d| format!("{d:.10}")));
            row.push(format!("{:.10}", r.regret_inc));
            row.push(format!("{:.10}", r.penalty_inc));
            row.push(if r.violation { "1" } else { "0" }.to_string());
            w.write_record(&row)?;
        }
        w.flush()?;
        Ok(())
    }

    /// Writes the trial summary (everything except per-period rows) as
    /// pretty-printed JSON.
    pub fn write_summary_json(&self, path: &Path) -> Result<()> {
        #[derive(Serialize)]
        struct Summary<'a> {
            instance: &'a str,
            policy: &'a str,
            lambda: f64,
            seed: u64,
            horizon: u64,
            regret: f64,
            penalty: f64,
            penalized_regret: f64,
            realized_revenue: f64,
            violation_periods: u64,
            violation_fraction: f64,
            stage_periods: [u64; 3],
            committed_prices: &'a [f64],
            fingerprint: u64,
        }
        let s = Summary {
            instance: &self.instance,
            policy: &self.policy,
            lambda: self.lambda,
            seed: self.seed,
            horizon: self.horizon,
            regret: self.regret,
            penalty: self.penalty,
            penalized_regret: self.penalized_regret(),
            realized_revenue: self.realized_revenue,
            violation_periods: self.violation_periods,
            violation_fraction: self.violation_fraction(),
            stage_periods: self.stage_periods,
            committed_prices: &self.committed_prices,
            fingerprint: self.fingerprint,
        };
        let mut f = std::fs::File::create(path)?;
        f.write_all(serde_json::to_string_pretty(&s)?.as_bytes())?;
        f.write_all(b"\n")?;
        Ok(())
    }
}

/// Accumulates periods into a [`TrialTrace`]. Owned by the simulation
/// environment; policies never touch it directly.
#[derive(Debug)]
pub struct TraceBuilder {
    horizon: u64,
    options: TraceOptions,
    records: Vec<PeriodRecord>,
    regret: f64,
    penalty: f64,
    realized_revenue: f64,
    violation_periods: u64,
    stage_periods: [u64; 3],
    fingerprint: u64,
}

const FNV_OFFSET: u64 = 0xcbf2_9ce4_8422_2325;
const FNV_PRIME: u64 = 0x0000_0100_0000_01b3;

impl TraceBuilder {
    pub fn new(horizon: u64, options: TraceOptions) -> Self {
        let capacity = if options.full {
            horizon.min(4_000_000) as usize
        } else if options.sample_every > 0 {
            (horizon / options.sample_every + 2) as usize
        } else {
            0
        };
        TraceBuilder {
            horizon,
            options,
            records: Vec::with_capacity(capacity),
            regret: 0.0,
            penalty: 0.0,
            realized_revenue: 0.0,
            violation_periods: 0,
            stage_periods: [0; 3],
            fingerprint: FNV_OFFSET,
        }
    }

    pub fn push(&mut self, record: PeriodRecord, realized_revenue: f64) {
        self.regret += record.regret_inc;
        self.penalty += record.penalty_inc;
        self.realized_revenue += realized_revenue;
        if record.violation {
            self.violation_periods += 1;
        }
        self.stage_periods[record.stage.index()] += 1;
        for &p in &record.prices {
            self.mix(p.to_bits());
        }
        for &d in &record.demands {
            self.mix(d.to_bits());
        }
        if self.options.keeps(record.period, self.horizon) {
            self.records.push(record);
        }
    }

    fn mix(&mut self, bits: u64) {
        // FNV-1a over the 8 bytes of each f64.
        for shift in (0..64).step_by(8) {
            self.fingerprint ^= (bits >> shift) & 0xff;
            self.fingerprint = self.fingerprint.wrapping_mul(FNV_PRIME);
        }
    }

    pub fn periods_recorded(&self) -> u64 {
        self.stage_periods.iter().sum()
    }

    pub fn finish(
        self,
        instance: String,
        policy: String,
        lambda: f64,
        seed: u64,
        committed_prices: Vec<f64>,
    ) -> TrialTrace {
        TrialTrace {
            instance,
            policy,
            lambda,
            seed,
            horizon: self.horizon,
            regret: self.regret,
            penalty: self.penalty,
            realized_revenue: self.realized_revenue,
            violation_periods: self.violation_periods,
            stage_periods: self.stage_periods,
            committed_prices,
            records: self.records,
            fingerprint: self.fingerprint,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn record(period: u64, stage: Stage, price: f64) -> PeriodRecord {
        PeriodRecord {
            period,
            stage,
            prices: vec![price, price + 1.0],
            demands: vec![0.5, 0.25],
            regret_inc: 0.1,
            penalty_inc: 0.05,
            violation: period % 2 == 0,
        }
    }

    #[test]
    fn builder_accumulates_all_periods_regardless_of_sampling() {
        let mut b = TraceBuilder::new(
            10,
            TraceOptions {
                full: false,
                sample_every: 4,
            },
        );
        for t in 1..=10 {
            let stage = if t <= 3 {
                Stage::Explore1
            } else if t <= 6 {
                Stage::Explore2
            } else {
                Stage::Commit
            };
            b.push(record(t, stage, 2.0), 0.8);
        }
        let trace = b.finish("i".into(), "p".into(), 0.5, 7, vec![2.0, 3.0]);
        assert!((trace.regret - 1.0).abs() < 1e-12);
        assert!((trace.penalty - 0.5).abs() < 1e-12);
        assert!((trace.realized_revenue - 8.0).abs() < 1e-12);
        assert_eq!(trace.violation_periods, 5);
        assert_eq!(trace.stage_periods, [3, 3, 4]);
        // Kept: periods 1, 5, 9 (sampling) + 10 (final).
        let kept: Vec<u64> = trace.records.iter().map(|r| r.period).collect();
        assert_eq!(kept, vec![1, 5, 9, 10]);
        assert!((trace.penalized_regret() - 1.5).abs() < 1e-12);
        assert!((trace.violation_fraction() - 0.5).abs() < 1e-12);
    }

    #[test]
    fn full_tracing_keeps_every_row_and_zero_sampling_keeps_none() {
        let mut b = TraceBuilder::new(5, TraceOptions::full());
        for t in 1..=5 {
            b.push(record(t, Stage::Commit, 1.0), 0.8);
        }
        assert_eq!(
            b.finish("i".into(), "p".into(), 0.0, 0, vec![]).records.len(),
            5
        );

        let mut b = TraceBuilder::new(
            5,
            TraceOptions {
                full: false,
                sample_every: 0,
            },
        );
        for t in 1..=5 {
            b.push(record(t, Stage::Commit, 1.0), 0.8);
        }
        let trace = b.finish("i".into(), "p".into(), 0.0, 0, vec![]);
        assert!(trace.records.is_empty());
        assert_eq!(trace.stage_periods[2], 5); // tallies survive
    }

    #[test]
    fn fingerprint_is_order_sensitive_and_covers_unretained_periods() {
        let run = |prices: &[f64], sample_every: u64| {
            let mut b = TraceBuilder::new(
                prices.len() as u64,
                TraceOptions {
                    full: false,
                    sample_every,
                },
            );
            for (i, &p) in prices.iter().enumerate() {
                b.push(record(i as u64 + 1, Stage::Commit, p), 0.8);
            }
            b.finish("i".into(), "p".into(), 0.0, 0, vec![]).fingerprint
        };
        let a = run(&[1.0, 2.0, 3.0], 100);
        let b = run(&[2.0, 1.0, 3.0], 100);
        assert_ne!(a, b, "fingerprint must depend on order");
        // Sampling cadence must not change the fingerprint.
        assert_eq!(a, run(&[1.0, 2.0, 3.0], 1));
        assert_ne!(a, run(&[1.0, 2.0], 100));
    }

    #[test]
    fn csv_roundtrip_preserves_rows_and_columns() {
        let mut b = TraceBuilder::new(3, TraceOptions::full());
        for t in 1..=3 {
            b.push(record(t, Stage::Explore1, 1.5), 0.8);
        }
        let trace = b.finish("i".into(), "p".into(), 0.5, 1, vec![1.0, 2.0]);
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("trace.csv");
        trace.write_csv(&path).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        let mut lines = text.lines();
        assert_eq!(
            lines.next().unwrap(),
            "period,stage,p_1,p_2,D_1,D_2,regret_inc,penalty_inc,violation"
        );
        assert_eq!(lines.clone().count(), 3);
        let first = lines.next().unwrap();
        assert!(first.starts_with("1,I,1.5"));
        assert!(first.ends_with(",0")); // period 1 is no violation

        let jpath = dir.path().join("summary.json");
        trace.write_summary_json(&jpath).unwrap();
        let v: serde_json::Value =
            serde_json::from_str(&std::fs::read_to_string(&jpath).unwrap()).unwrap();
        assert_eq!(v["horizon"], 3);
        assert_eq!(v["committed_prices"], serde_json::json!([1.0, 2.0]));
        assert!(v["penalized_regret"].as_f64().unwrap() > 0.0);
    }

    #[test]
    fn stage_labels_are_roman_numerals() {
        assert_eq!(Stage::Explore1.label(), "I");
        assert_eq!(Stage::Explore2.label(), "II");
        assert_eq!(Stage::Commit.label(), "III");
    }
}
