//! Minimal library walkthrough: look up an instance, solve the clairvoyant
//! benchmark, run one seeded trial of the two-group hard-constraint learner.
//! Mirrors the README's library-use snippet.

use fairprice::{catalog, oracle, run_trial, FairnessSpec, OracleOptions, PolicyKind, TrialSetup};

fn main() -> Result<(), fairprice::Error> {
    let instance = catalog::by_name("exp-pair")?;
    let spec = FairnessSpec::hard_price(&instance, 0.5)?;
    let benchmark = oracle::solve(&instance, &spec, &OracleOptions::default())?;
    let trace = run_trial(&TrialSetup::new(instance, spec, PolicyKind::FdpDl, 100_000, 17))?;
    println!(
        "regret {:.1} vs benchmark revenue {:.3}/period",
        trace.regret, benchmark.revenue_star
    );
    Ok(())
}
