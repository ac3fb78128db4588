//! Exploration schedules: how many samples each learning stage spends as a
//! function of the horizon `T`.
//!
//! The shape of every count is fixed by the analysis that motivates the
//! policies — trisection comparisons need `~ T^{4/5} ln T` samples per price
//! probe, checkpoint evaluation `~ T^{2/5} ln T` per checkpoint, windows
//! shrink like `T^{-1/5}` — but the leading constants are pure bookkeeping.
//! At publication-grade horizons the analysis constants are astronomically
//! conservative (the trisection count alone would exceed any desk-scale
//! horizon), so the default schedule keeps the exponents and rescales the
//! constants to values tuned for horizons in the `10^4 .. 10^6` range.
//! [`ExplorationSchedule::analysis`] restores the analysis constants verbatim.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Sample-count schedule shared by all explore-then-commit policies.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ExplorationSchedule {
    /// Multiplier on the analysis trisection count
    /// `25 K^4 pbar^2 / C^2 * T^{4/5} ln(N T)`.
    pub c_trisect: f64,
    /// Multiplier on the analysis per-checkpoint count `6 T^{2/5} ln(N T)`.
    pub c_checkpoint: f64,
    /// Trisection stop width; `None` means the analysis default
    /// `4 T^{-1/5}`.
    pub trisect_stop_width: Option<f64>,
    /// Slack subtracted from the estimated disparity before scaling by
    /// `lambda`; `None` means the analysis default `8 T^{-1/5}` (times the
    /// discrepancy Lipschitz constant where one applies).
    pub xi_slack: Option<f64>,
    /// Multiplier on the checkpoint-grid density `(hi - lo) T^{1/5}`.
    pub checkpoint_count_scale: f64,
    /// Demand Lipschitz constant `K` entering the trisection count.
    pub lipschitz_demand: f64,
    /// Revenue strong-concavity constant `C` entering the trisection count.
    pub concavity: f64,
    /// Measure Lipschitz constant (general-measure policies).
    pub lipschitz_measure: f64,
    /// Measure range bound (general-measure policies).
    pub measure_bound: f64,
}

impl Default for ExplorationSchedule {
    fn default() -> Self {
        ExplorationSchedule {
            // Desk-scale constants; see the trisect/checkpoint sizing tests
            // for the budget fractions these induce at T = 1e5.
            c_trisect: 1.5e-5,
            c_checkpoint: 0.05,
            trisect_stop_width: None,
            xi_slack: None,
            checkpoint_count_scale: 1.0,
            lipschitz_demand: 1.0,
            concavity: 1.0,
            lipschitz_measure: 1.0,
            measure_bound: 1.0,
        }
    }
}

impl ExplorationSchedule {
    /// The analysis constants verbatim (`c = 1` everywhere). Only meaningful
    /// for horizons far beyond desk scale; exposed so the schedule arithmetic
    /// itself can be exercised at face value.
    pub fn analysis() -> Self {
        ExplorationSchedule {
            c_trisect: 1.0,
            c_checkpoint: 1.0,
            ..ExplorationSchedule::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("c_trisect", self.c_trisect),
            ("c_checkpoint", self.c_checkpoint),
            ("checkpoint_count_scale", self.checkpoint_count_scale),
            ("lipschitz_demand", self.lipschitz_demand),
            ("concavity", self.concavity),
            ("lipschitz_measure", self.lipschitz_measure),
            ("measure_bound", self.measure_bound),
        ] {
            if !v.is_finite() || v <= 0.0 {
                return Err(Error::invalid("schedule", format!("{name} must be finite and > 0")));
            }
        }
        for (name, v) in [
            ("trisect_stop_width", self.trisect_stop_width),
            ("xi_slack", self.xi_slack),
        ] {
            if let Some(v) = v {
                if !v.is_finite() || v < 0.0 {
                    return Err(Error::invalid(
                        "schedule",
                        format!("{name} must be finite and >= 0 when set"),
                    ));
                }
            }
        }
        Ok(())
    }

    /// Samples per trisection probe:
    /// `max(1, ceil(c_trisect * 25 K^4 pbar^2 / C^2 * T^{4/5} ln(N_log T)))`.
    /// `log_groups` is the group-count factor inside the logarithm (1 for
    /// two-group policies, `N` for multi-group ones).
    pub fn trisect_count(&self, horizon: u64, p_bar: f64, log_groups: usize) -> u64 {
        let t = horizon as f64;
        let k4 = self.lipschitz_demand.powi(4);
        let lead = self.c_trisect * 25.0 * k4 * p_bar * p_bar / (self.concavity * self.concavity);
        let n = lead * t.powf(0.8) * ((log_groups as f64) * t).ln().max(1.0);
        (ceil_guarded(n) as u64).max(1)
    }

    /// Samples per checkpoint:
    /// `max(1, ceil(c_checkpoint * 6 T^{2/5} ln(N_log T)))`.
    pub fn checkpoint_count(&self, horizon: u64, log_groups: usize) -> u64 {
        let t = horizon as f64;
        let n = self.c_checkpoint * 6.0 * t.powf(0.4) * ((log_groups as f64) * t).ln().max(1.0);
        (ceil_guarded(n) as u64).max(1)
    }

    /// Trisection stop width: configured value or `4 T^{-1/5}`.
    pub fn stop_width(&self, horizon: u64) -> f64 {
        self.trisect_stop_width
            .unwrap_or_else(|| 4.0 * (horizon as f64).powf(-0.2))
    }

    /// Disparity slack: configured value or `8 T^{-1/5}`.
    pub fn xi_slack(&self, horizon: u64) -> f64 {
        self.xi_slack.unwrap_or_else(|| 8.0 * (horizon as f64).powf(-0.2))
    }

    /// Number of checkpoints for a price window of the given width:
    /// `max(1, ceil(scale * width * T^{1/5}))`.
    pub fn checkpoints(&self, horizon: u64, width: f64) -> usize {
        let j = self.checkpoint_count_scale * width * (horizon as f64).powf(0.2);
        (ceil_guarded(j) as usize).max(1)
    }
}

/// Ceiling with a one-part-in-10^9 allowance so that counts which are exact
/// integers in real arithmetic (e.g. `5 * (10^5)^{1/5} = 50`) do not pick up
/// a spurious `+1` from `powf` rounding.
fn ceil_guarded(x: f64) -> f64 {
    (x - 1e-9).ceil().max(0.0)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_schedule_validates() {
        ExplorationSchedule::default().validate().unwrap();
        ExplorationSchedule::analysis().validate().unwrap();
    }

    #[test]
    fn validation_rejects_nonpositive_constants() {
        let mut s = ExplorationSchedule::default();
        s.c_trisect = 0.0;
        assert!(s.validate().is_err());
        let mut s = ExplorationSchedule::default();
        s.concavity = f64::NAN;
        assert!(s.validate().is_err());
        let mut s = ExplorationSchedule::default();
        s.xi_slack = Some(-1.0);
        assert!(s.validate().is_err());
    }

    #[test]
    fn analysis_constants_reproduce_the_unscaled_counts() {
        let s = ExplorationSchedule::analysis();
        let t = 100_000u64;
        // 25 * 5^2 * 1e4 * ln(1e5) = 71_957_045.2..; ceil.
        let want = (25.0 * 25.0 * (t as f64).powf(0.8) * (t as f64).ln()).ceil() as u64;
        assert_eq!(s.trisect_count(t, 5.0, 1), want);
        // 6 * T^{2/5} ln T.
        let want = (6.0 * (t as f64).powf(0.4) * (t as f64).ln()).ceil() as u64;
        assert_eq!(s.checkpoint_count(t, 1), want);
    }

    #[test]
    fn multi_group_log_factor_enters_the_counts() {
        let s = ExplorationSchedule::analysis();
        let t = 10_000u64;
        assert!(s.trisect_count(t, 5.0, 3) > s.trisect_count(t, 5.0, 1));
        assert!(s.checkpoint_count(t, 3) > s.checkpoint_count(t, 1));
    }

    #[test]
    fn widths_scale_as_inverse_fifth_root() {
        let s = ExplorationSchedule::default();
        let w5 = s.stop_width(100_000);
        assert!((w5 - 4.0 * 1e-1).abs() < 1e-12); // (1e5)^{-1/5} = 0.1
        assert!((s.xi_slack(100_000) - 0.8).abs() < 1e-12);
        // Overrides win.
        let mut s = s;
        s.trisect_stop_width = Some(0.01);
        s.xi_slack = Some(0.0);
        assert_eq!(s.stop_width(100_000), 0.01);
        assert_eq!(s.xi_slack(100_000), 0.0);
    }

    #[test]
    fn checkpoint_grid_density_tracks_width_and_horizon() {
        let s = ExplorationSchedule::default();
        // width 5 on T = 1e5: 5 * 10 = 50 checkpoints.
        assert_eq!(s.checkpoints(100_000, 5.0), 50);
        assert_eq!(s.checkpoints(100_000, 0.0), 1); // floor at 1
        assert!(s.checkpoints(3_200_000, 5.0) > s.checkpoints(100_000, 5.0));
    }

    #[test]
    fn counts_are_at_least_one_even_for_tiny_horizons() {
        let s = ExplorationSchedule::default();
        assert!(s.trisect_count(2, 1.0, 1) >= 1);
        assert!(s.checkpoint_count(2, 1) >= 1);
    }

    #[test]
    fn desk_constants_leave_most_of_the_budget_for_commitment() {
        // The tuned defaults must keep Stage I + II under half the horizon at
        // T = 1e5 for a 2-group run on a width-5 domain: the commit stage is
        // where regret differences between policies show up. Groups explore
        // sequentially, so Stage I costs groups x iterations x 2 probes x n1.
        let s = ExplorationSchedule::default();
        let t = 100_000u64;
        let width = 5.0f64;
        let stop = s.stop_width(t); // 0.4
        let iters = ((stop / width).ln() / (2.0f64 / 3.0).ln()).ceil() as u64; // 7
        let stage1 = 2 * iters * 2 * s.trisect_count(t, 5.0, 1);
        let stage2 = s.checkpoints(t, width) as u64 * s.checkpoint_count(t, 1);
        assert!(stage1 + stage2 < t / 2, "stage1 {stage1} + stage2 {stage2}");
    }
}
