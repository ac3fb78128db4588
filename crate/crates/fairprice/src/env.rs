//! The simulation environment policies interact with.
//!
//! An [`Environment`] owns the market instance, the fairness spec, the
//! clairvoyant benchmark, the RNG, and the trace builder. Policies see a
//! single operation — [`Environment::post`] — which spends one period: it
//! samples realized demand at the posted prices, charges regret and penalty
//! against the *true* expected curves, and returns the observations. When the
//! horizon is exhausted `post` returns `None`; a policy's commit loop is
//! simply `while env.post(&prices).is_some() {}`.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::demand::{MarketInstance, PriceInterval};
use crate::measure::FairnessSpec;
use crate::oracle::ClairvoyantSolution;
use crate::trace::{PeriodRecord, Stage, TraceBuilder, TraceOptions, TrialTrace};

/// Live state of one trial: budget, RNG, and accounting.
pub struct Environment {
    instance: MarketInstance,
    spec: FairnessSpec,
    benchmark: ClairvoyantSolution,
    horizon: u64,
    used: u64,
    rng: ChaCha8Rng,
    stage: Stage,
    builder: TraceBuilder,
    committed: Vec<f64>,
    scratch: Vec<f64>,
}

impl Environment {
    pub fn new(
        instance: MarketInstance,
        spec: FairnessSpec,
        benchmark: ClairvoyantSolution,
        horizon: u64,
        seed: u64,
        trace: TraceOptions,
    ) -> Self {
        let groups = instance.groups();
        Environment {
            instance,
            spec,
            benchmark,
            horizon,
            used: 0,
            rng: ChaCha8Rng::seed_from_u64(seed),
            stage: Stage::Explore1,
            builder: TraceBuilder::new(horizon, trace),
            committed: Vec::new(),
            scratch: vec![0.0; groups],
        }
    }

    // -- read-only views ------------------------------------------------

    pub fn instance(&self) -> &MarketInstance {
        &self.instance
    }

    pub fn spec(&self) -> &FairnessSpec {
        &self.spec
    }

    pub fn benchmark(&self) -> &ClairvoyantSolution {
        &self.benchmark
    }

    pub fn domain(&self) -> PriceInterval {
        self.instance.domain()
    }

    pub fn cost(&self) -> f64 {
        self.instance.cost()
    }

    pub fn groups(&self) -> usize {
        self.instance.groups()
    }

    pub fn horizon(&self) -> u64 {
        self.horizon
    }

    pub fn used(&self) -> u64 {
        self.used
    }

    pub fn remaining(&self) -> u64 {
        self.horizon - self.used
    }

    // -- stage + commitment bookkeeping ----------------------------------

    pub fn set_stage(&mut self, stage: Stage) {
        self.stage = stage;
    }

    pub fn stage(&self) -> Stage {
        self.stage
    }

    /// Records the prices the policy has committed to (for the trace only;
    /// the policy still posts them itself).
    pub fn set_committed(&mut self, prices: &[f64]) {
        self.committed = prices.to_vec();
    }

    // -- the one period-spending operation -------------------------------

    /// Posts one price per group for a single period. Returns the realized
    /// demands, or `None` once the horizon is exhausted (the posting is then
    /// a no-op). Prices outside the instance domain are policy bugs and
    /// panic.
    pub fn post(&mut self, prices: &[f64]) -> Option<&[f64]> {
        assert_eq!(
            prices.len(),
            self.instance.groups(),
            "one price per group required"
        );
        if self.used >= self.horizon {
            return None;
        }
        let dom = self.instance.domain();
        for &p in prices {
            assert!(
                dom.contains(p),
                "posted price {p} outside domain [{}, {}]",
                dom.lo,
                dom.hi
            );
        }
        self.used += 1;

        for (z, &p) in prices.iter().enumerate() {
            self.scratch[z] = self.instance.sample(z, p, &mut self.rng);
        }

        // Accounting on true expectations, never on the sampled demands.
        let true_demands: Vec<f64> = prices
            .iter()
            .enumerate()
            .map(|(z, &p)| self.instance.demand(z, p))
            .collect();
        let revenue: f64 = prices
            .iter()
            .enumerate()
            .map(|(z, &p)| self.instance.revenue(z, p))
            .sum();
        let regret_inc = self.benchmark.revenue_star - revenue;
        let acct = self
            .spec
            .account(prices, &true_demands, self.benchmark.gap_sharp);
        let realized_revenue: f64 = prices
            .iter()
            .zip(&self.scratch)
            .map(|(&p, &d)| (p - self.instance.cost()) * d)
            .sum();

        self.builder.push(
            PeriodRecord {
                period: self.used,
                stage: self.stage,
                prices: prices.to_vec(),
                demands: self.scratch.clone(),
                regret_inc,
                penalty_inc: acct.penalty,
                violation: acct.violation,
            },
            realized_revenue,
        );
        Some(&self.scratch)
    }

    /// Posts the same price vector for up to `n` periods and accumulates the
    /// realized demands. Returns per-group demand *sums* and the number of
    /// periods actually posted (less than `n` only when the horizon ran out).
    pub fn post_n(&mut self, prices: &[f64], n: u64) -> (Vec<f64>, u64) {
        let mut sums = vec![0.0; self.instance.groups()];
        let mut posted = 0;
        for _ in 0..n {
            match self.post(prices) {
                Some(demands) => {
                    for (s, &d) in sums.iter_mut().zip(demands) {
                        *s += d;
                    }
                    posted += 1;
                }
                None => break,
            }
        }
        (sums, posted)
    }

    /// Finalizes the trial into a [`TrialTrace`].
    pub fn finish(self, policy: String, seed: u64) -> TrialTrace {
        self.builder.finish(
            self.instance.name().to_string(),
            policy,
            self.spec.lambda,
            seed,
            self.committed,
        )
    }
}
