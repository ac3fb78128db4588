//! End-to-end tests of the `fairprice` binary:
//!
//! * exit codes — 0 success, 1 runtime failure, 2 usage/validation error;
//! * written artifacts are byte-identical across reruns with the same seed;
//! * `FAIRPRICE_SEED` overrides `--seed` and rejects non-integers;
//! * existing outputs are never clobbered without `--force`;
//! * `--dry-run` executes nothing and writes nothing;
//! * config-file violations are all reported at once;
//! * the oracle subcommand emits the benchmark as parseable JSON.

use std::path::Path;
use std::process::{Command, Output};

use tempfile::tempdir;

fn bin() -> Command {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_fairprice"));
    // Isolation: a seed override leaking in from the harness environment
    // would silently change every seeded assertion below.
    cmd.env_remove("FAIRPRICE_SEED");
    cmd
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("process terminated by signal")
}

fn stdout(out: &Output) -> String {
    String::from_utf8_lossy(&out.stdout).into_owned()
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

fn read(path: &Path) -> Vec<u8> {
    std::fs::read(path).unwrap_or_else(|e| panic!("reading {}: {e}", path.display()))
}

/// `run` with a fixed seed writes trace.csv and summary.json, and a rerun
/// into a fresh directory reproduces both byte for byte.
#[test]
fn run_writes_deterministic_artifacts() {
    let dir = tempdir().unwrap();
    let out1 = dir.path().join("a");
    let out2 = dir.path().join("b");
    for out in [&out1, &out2] {
        let result = bin()
            .args(["run", "--instance", "exp-pair", "--policy", "fdp-dl"])
            .args(["--lambda", "0.5", "--T", "5000", "--seed", "42"])
            .arg("--out")
            .arg(out)
            .output()
            .unwrap();
        assert_eq!(code(&result), 0, "stderr: {}", stderr(&result));
        let text = stdout(&result);
        assert!(text.contains("regret"), "missing headline in: {text}");
        assert!(text.contains("seed              = 42"), "wrong seed in: {text}");
    }
    assert_eq!(read(&out1.join("trace.csv")), read(&out2.join("trace.csv")));
    assert_eq!(
        read(&out1.join("summary.json")),
        read(&out2.join("summary.json"))
    );
}

/// A second `run` into the same directory is refused (exit 1) until
/// `--force` is passed.
#[test]
fn run_refuses_overwrite_without_force() {
    let dir = tempdir().unwrap();
    let args = [
        "run", "--instance", "exp-pair", "--policy", "baseline-etc", "--lambda", "0.2", "--T",
        "2000", "--seed", "7",
    ];
    let first = bin().args(args).arg("--out").arg(dir.path()).output().unwrap();
    assert_eq!(code(&first), 0, "stderr: {}", stderr(&first));

    let second = bin().args(args).arg("--out").arg(dir.path()).output().unwrap();
    assert_eq!(code(&second), 1);
    assert!(stderr(&second).contains("already exists"), "{}", stderr(&second));

    let forced = bin()
        .args(args)
        .arg("--out")
        .arg(dir.path())
        .arg("--force")
        .output()
        .unwrap();
    assert_eq!(code(&forced), 0, "stderr: {}", stderr(&forced));
}

/// `FAIRPRICE_SEED` beats `--seed`: the run matches a plain `--seed` run
/// with the override value, not the flag value.
#[test]
fn seed_env_var_overrides_flag() {
    let dir = tempdir().unwrap();
    let (via_env, via_flag, plain) = (
        dir.path().join("env"),
        dir.path().join("flag"),
        dir.path().join("plain"),
    );
    let run = |out: &Path, seed: &str, env: Option<&str>| {
        let mut cmd = bin();
        cmd.args(["run", "--instance", "linear-pair", "--policy", "fdp-dl"])
            .args(["--lambda", "0.8", "--T", "3000", "--seed", seed])
            .arg("--out")
            .arg(out);
        if let Some(v) = env {
            cmd.env("FAIRPRICE_SEED", v);
        }
        let result = cmd.output().unwrap();
        assert_eq!(code(&result), 0, "stderr: {}", stderr(&result));
        stdout(&result)
    };
    let text = run(&via_env, "1", Some("42"));
    assert!(text.contains("seed              = 42"), "{text}");
    run(&via_flag, "42", None);
    run(&plain, "1", None);
    let env_bytes = read(&via_env.join("summary.json"));
    assert_eq!(env_bytes, read(&via_flag.join("summary.json")));
    assert_ne!(env_bytes, read(&plain.join("summary.json")));
}

/// An unparsable `FAIRPRICE_SEED` is a usage error, not a silent fallback.
#[test]
fn seed_env_var_must_be_an_integer() {
    let result = bin()
        .args(["run", "--instance", "exp-pair", "--policy", "fdp-dl"])
        .args(["--lambda", "0.5", "--T", "1000", "--seed", "1"])
        .env("FAIRPRICE_SEED", "abc")
        .output()
        .unwrap();
    assert_eq!(code(&result), 2);
    assert!(stderr(&result).contains("FAIRPRICE_SEED"), "{}", stderr(&result));
}

/// Validation problems — tolerance out of range, unknown names — exit 2.
#[test]
fn run_rejects_bad_inputs_with_usage_code() {
    let base = ["run", "--T", "1000", "--seed", "1"];
    let cases: [&[&str]; 3] = [
        &["--instance", "exp-pair", "--policy", "fdp-dl", "--lambda", "1.5"],
        &["--instance", "exp-pair", "--policy", "no-such-policy", "--lambda", "0.5"],
        &["--instance", "no-such-instance", "--policy", "fdp-dl", "--lambda", "0.5"],
    ];
    for extra in cases {
        let result = bin().args(base).args(extra).output().unwrap();
        assert_eq!(code(&result), 2, "args {extra:?}, stderr: {}", stderr(&result));
        assert!(stderr(&result).contains("error:"), "{}", stderr(&result));
    }
}

/// The hard pair passes every analytic check at the top of its curvature
/// range.
#[test]
fn verify_lb_passes_at_high_curvature() {
    let result = bin()
        .args(["verify-lb", "--A", "30", "--h", "0.005"])
        .output()
        .unwrap();
    assert_eq!(code(&result), 0, "stderr: {}", stderr(&result));
    assert!(stdout(&result).contains("all 6 checks passed"), "{}", stdout(&result));
}

/// At the bottom of the curvature range the third curve's slope check
/// genuinely fails; the command reports it and exits 1.
#[test]
fn verify_lb_reports_failures_at_low_curvature() {
    let result = bin()
        .args(["verify-lb", "--A", "20", "--h", "0.005"])
        .output()
        .unwrap();
    assert_eq!(code(&result), 1);
    let text = stdout(&result);
    assert!(text.contains("FAIL c-slope-and-concavity"), "{text}");
    assert!(text.contains("1 of 6 checks failed"), "{text}");
}

/// Parameters outside the construction's validity region are usage errors.
#[test]
fn verify_lb_rejects_out_of_range_parameters() {
    for args in [["--A", "50", "--h", "0.005"], ["--A", "25", "--h", "0.02"]] {
        let result = bin().arg("verify-lb").args(args).output().unwrap();
        assert_eq!(code(&result), 2, "args {args:?}, stderr: {}", stderr(&result));
    }
}

/// `--dry-run` prints the resolved grid and cost, executes nothing, and does
/// not even create the output directory.
#[test]
fn sweep_dry_run_writes_nothing() {
    let dir = tempdir().unwrap();
    let out = dir.path().join("sweep");
    let result = bin()
        .args(["sweep", "--preset", "desk-scale", "--dry-run", "--out"])
        .arg(&out)
        .output()
        .unwrap();
    assert_eq!(code(&result), 0, "stderr: {}", stderr(&result));
    let text = stdout(&result);
    assert!(text.contains("3 policies x 5 lambdas x 4 horizons = 60 cells"), "{text}");
    assert!(text.contains("3000 total"), "{text}");
    assert!(text.contains("dry run"), "{text}");
    assert!(!out.exists(), "dry run created {}", out.display());
}

const TINY_CONFIG: &str = "\
# tiny two-policy grid for the end-to-end test
[sweep]
name = tiny
instance = exp-pair
policies = fdp-dl, baseline-etc
lambdas = 0.5
horizons = 2000, 4000, 8000
trials = 3
base_seed = 7

[schedule]
trisect_stop_width = auto
";

/// A config-file sweep runs, writes all three artifacts, and reruns
/// byte-identically (the manifest carries the only timestamp, so it is
/// checked for content rather than bytes).
#[test]
fn sweep_from_config_is_reproducible() {
    let dir = tempdir().unwrap();
    let config = dir.path().join("tiny.conf");
    std::fs::write(&config, TINY_CONFIG).unwrap();
    let (out1, out2) = (dir.path().join("s1"), dir.path().join("s2"));
    for out in [&out1, &out2] {
        let result = bin()
            .arg("sweep")
            .arg("--config")
            .arg(&config)
            .arg("--out")
            .arg(out)
            .output()
            .unwrap();
        assert_eq!(code(&result), 0, "stderr: {}", stderr(&result));
        let text = stdout(&result);
        assert!(text.contains("sweep      = tiny"), "{text}");
        assert!(text.contains("cells done = 6 (0 with errors)"), "{text}");
    }
    assert_eq!(read(&out1.join("results.csv")), read(&out2.join("results.csv")));
    assert_eq!(read(&out1.join("slopes.csv")), read(&out2.join("slopes.csv")));
    let manifest = String::from_utf8(read(&out1.join("manifest.json"))).unwrap();
    assert!(manifest.contains("\"tiny\""), "{manifest}");
}

/// Sweep outputs are protected by the same overwrite rule as `run`.
#[test]
fn sweep_refuses_overwrite_without_force() {
    let dir = tempdir().unwrap();
    let config = dir.path().join("tiny.conf");
    std::fs::write(&config, TINY_CONFIG).unwrap();
    let run = |force: bool| {
        let mut cmd = bin();
        cmd.arg("sweep")
            .arg("--config")
            .arg(&config)
            .arg("--out")
            .arg(dir.path().join("out"));
        if force {
            cmd.arg("--force");
        }
        cmd.output().unwrap()
    };
    assert_eq!(code(&run(false)), 0);
    let blocked = run(false);
    assert_eq!(code(&blocked), 1);
    assert!(stderr(&blocked).contains("already exists"), "{}", stderr(&blocked));
    assert_eq!(code(&run(true)), 0);
}

/// Without a config or preset the sweep command explains what to pass.
#[test]
fn sweep_requires_a_config_or_preset() {
    let result = bin().args(["sweep", "--dry-run"]).output().unwrap();
    assert_eq!(code(&result), 2);
    assert!(
        stderr(&result).contains("pass either --config <path> or --preset <name>"),
        "{}",
        stderr(&result)
    );
}

/// Every violation in a bad config is reported in one pass.
#[test]
fn sweep_reports_all_config_violations_at_once() {
    let dir = tempdir().unwrap();
    let config = dir.path().join("bad.conf");
    std::fs::write(
        &config,
        "instance = exp-pair\npolicies = fdp-dl\nlambdas = 0.5, 1.5\nhorizons = 2000, 1000\n",
    )
    .unwrap();
    let result = bin()
        .arg("sweep")
        .arg("--config")
        .arg(&config)
        .arg("--out")
        .arg(dir.path().join("out"))
        .output()
        .unwrap();
    assert_eq!(code(&result), 2);
    let text = stderr(&result);
    assert!(text.contains("lambdas: 1.5 outside [0, 1]"), "{text}");
    assert!(text.contains("horizons: must be strictly increasing"), "{text}");
}

/// `--workers 0` can never mean anything sensible.
#[test]
fn sweep_rejects_zero_workers() {
    let result = bin()
        .args(["sweep", "--preset", "desk-scale", "--workers", "0", "--dry-run"])
        .output()
        .unwrap();
    assert_eq!(code(&result), 2);
    assert!(stderr(&result).contains("--workers"), "{}", stderr(&result));
}

/// The oracle subcommand prints the clairvoyant benchmark as JSON; on the
/// equal-slope linear pair at lambda 0.5 the constrained optimum is the
/// known closed form (3.25, 3.75).
#[test]
fn oracle_emits_benchmark_json() {
    let result = bin()
        .args(["oracle", "--instance", "linear-pair", "--lambda", "0.5"])
        .output()
        .unwrap();
    assert_eq!(code(&result), 0, "stderr: {}", stderr(&result));
    let v: serde_json::Value = serde_json::from_str(&stdout(&result)).unwrap();
    assert_eq!(v["lambda"].as_f64().unwrap(), 0.5);
    let p_star: Vec<f64> = v["p_star"]
        .as_array()
        .unwrap()
        .iter()
        .map(|x| x.as_f64().unwrap())
        .collect();
    assert!((p_star[0] - 3.25).abs() < 1e-6, "{p_star:?}");
    assert!((p_star[1] - 3.75).abs() < 1e-6, "{p_star:?}");

    // The exhaustive grid solver agrees with the structure-aware one to
    // within its grid resolution.
    let brute = bin()
        .args(["oracle", "--instance", "linear-pair", "--lambda", "0.5"])
        .args(["--brute-step", "1e-3"])
        .output()
        .unwrap();
    assert_eq!(code(&brute), 0, "stderr: {}", stderr(&brute));
    let b: serde_json::Value = serde_json::from_str(&stdout(&brute)).unwrap();
    assert!((b["p_star"][0].as_f64().unwrap() - 3.25).abs() < 5e-3);
}

/// A non-positive brute-force grid step is a usage error.
#[test]
fn oracle_rejects_nonpositive_brute_step() {
    let result = bin()
        .args(["oracle", "--instance", "exp-pair", "--lambda", "0.5"])
        .args(["--brute-step", "0"])
        .output()
        .unwrap();
    assert_eq!(code(&result), 2);
    assert!(stderr(&result).contains("--brute-step"), "{}", stderr(&result));
}
