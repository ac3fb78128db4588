//! Sweep-config file format: flat, line-oriented `key = value` pairs under
//! `[sweep]` and `[schedule]` section headers.
//!
//! Grammar (also documented in the README):
//! - `#` starts a comment anywhere on a line; blank lines are ignored.
//! - `[sweep]` / `[schedule]` switch the active section; keys before any
//!   header belong to `[sweep]`.
//! - Every other non-blank line must be `key = value`; list values are
//!   comma-separated.
//! - Unknown sections, unknown keys, and duplicate keys are errors.
//! - All schema violations are collected and reported together, each naming
//!   the offending key (and line where that is the clearer pointer).

use crate::catalog;
use crate::error::{Error, Result};
use crate::experiment::{SweepConfig, SweepMeasure};
use crate::policy::PolicyKind;
use crate::schedule::ExplorationSchedule;

const SWEEP_KEYS: [&str; 10] = [
    "name",
    "instance",
    "policies",
    "lambdas",
    "horizons",
    "trials",
    "base_seed",
    "gamma",
    "measure",
    "workers",
];

const SCHEDULE_KEYS: [&str; 9] = [
    "c_trisect",
    "c_checkpoint",
    "checkpoint_count_scale",
    "lipschitz_demand",
    "concavity",
    "lipschitz_measure",
    "measure_bound",
    "trisect_stop_width",
    "xi_slack",
];

/// Raw `key = value` pairs split by section, before typing.
struct RawConfig {
    sweep: Vec<(String, String)>,
    schedule: Vec<(String, String)>,
}

fn split_lines(text: &str, violations: &mut Vec<String>) -> RawConfig {
    let mut raw = RawConfig {
        sweep: Vec::new(),
        schedule: Vec::new(),
    };
    #[derive(PartialEq)]
    enum Section {
        Sweep,
        Schedule,
        Unknown,
    }
    let mut section = Section::Sweep;
    let mut seen: std::collections::HashSet<(u8, String)> = std::collections::HashSet::new();
    for (idx, line) in text.lines().enumerate() {
        let lineno = idx + 1;
        let body = line.split('#').next().unwrap_or("").trim();
        if body.is_empty() {
            continue;
        }
        if body.starts_with('[') {
            match body {
                "[sweep]" => section = Section::Sweep,
                "[schedule]" => section = Section::Schedule,
                other => {
                    violations.push(format!(
                        "line {lineno}: unknown section {other}; expected [sweep] or [schedule]"
                    ));
                    section = Section::Unknown;
                }
            }
            continue;
        }
        let Some((key, value)) = body.split_once('=') else {
            violations.push(format!(
                "line {lineno}: expected `key = value`, got `{body}`"
            ));
            continue;
        };
        let key = key.trim().to_string();
        let value = value.trim().to_string();
        let (tag, known, bucket): (u8, &[&str], &mut Vec<(String, String)>) = match section {
            Section::Sweep => (0, &SWEEP_KEYS, &mut raw.sweep),
            Section::Schedule => (1, &SCHEDULE_KEYS, &mut raw.schedule),
            Section::Unknown => continue, // section error already recorded
        };
        if !known.contains(&key.as_str()) {
            violations.push(format!(
                "line {lineno}: unknown key `{key}` (known: {})",
                known.join(", ")
            ));
            continue;
        }
        if !seen.insert((tag, key.clone())) {
            violations.push(format!("line {lineno}: duplicate key `{key}`"));
            continue;
        }
        bucket.push((key, value));
    }
    raw
}

fn parse_f64(key: &str, value: &str, violations: &mut Vec<String>) -> Option<f64> {
    match value.parse::<f64>() {
        Ok(v) if v.is_finite() => Some(v),
        _ => {
            violations.push(format!("{key}: `{value}` is not a finite number"));
            None
        }
    }
}

fn parse_int<T: std::str::FromStr>(key: &str, value: &str, violations: &mut Vec<String>) -> Option<T> {
    match value.parse::<T>() {
        Ok(v) => Some(v),
        Err(_) => {
            violations.push(format!("{key}: `{value}` is not a non-negative integer"));
            None
        }
    }
}

fn parse_list<'v>(key: &str, value: &'v str, violations: &mut Vec<String>) -> Vec<&'v str> {
    let items: Vec<&str> = value.split(',').map(str::trim).collect();
    if items.iter().any(|s| s.is_empty()) {
        violations.push(format!("{key}: empty list item in `{value}`"));
        return Vec::new();
    }
    items
}

/// Parses a sweep config from the text of a config file. `default_name`
/// names the sweep when the file has no `name` key (the CLI passes the file
/// stem or preset name). On failure the returned [`Error::Config`] lists
/// every violation found, not just the first.
pub fn parse_sweep_config(text: &str, default_name: &str) -> Result<SweepConfig> {
    let mut violations: Vec<String> = Vec::new();
    let raw = split_lines(text, &mut violations);

    let mut name = default_name.to_string();
    let mut instance = None;
    let mut policies: Vec<PolicyKind> = Vec::new();
    let mut saw_policies = false;
    let mut lambdas: Vec<f64> = Vec::new();
    let mut saw_lambdas = false;
    let mut horizons: Vec<u64> = Vec::new();
    let mut saw_horizons = false;
    let mut trials: u32 = 50;
    let mut base_seed: u64 = 17;
    let mut gamma: f64 = 1.0;
    let mut measure = SweepMeasure::Price;
    let mut workers: Option<usize> = None;

    for (key, value) in &raw.sweep {
        match key.as_str() {
            "name" => {
                if value.is_empty() {
                    violations.push("name: must be non-empty".into());
                } else {
                    name = value.clone();
                }
            }
            "instance" => match catalog::by_name(value) {
                Ok(inst) => instance = Some(inst),
                Err(e) => violations.push(format!("instance: {e}")),
            },
            "policies" => {
                saw_policies = true;
                for item in parse_list(key, value, &mut violations) {
                    match item.parse::<PolicyKind>() {
                        Ok(p) => policies.push(p),
                        Err(e) => violations.push(format!("policies: {e}")),
                    }
                }
            }
            "lambdas" => {
                saw_lambdas = true;
                for item in parse_list(key, value, &mut violations) {
                    if let Some(v) = parse_f64(key, item, &mut violations) {
                        if (0.0..=1.0).contains(&v) {
                            lambdas.push(v);
                        } else {
                            violations.push(format!("lambdas: {v} outside [0, 1]"));
                        }
                    }
                }
            }
            "horizons" => {
                saw_horizons = true;
                for item in parse_list(key, value, &mut violations) {
                    if let Some(v) = parse_int::<u64>(key, item, &mut violations) {
                        if v == 0 {
                            violations.push("horizons: 0 is not a valid horizon".into());
                        } else {
                            horizons.push(v);
                        }
                    }
                }
                if horizons.windows(2).any(|w| w[0] >= w[1]) {
                    violations.push(format!(
                        "horizons: must be strictly increasing, got `{value}`"
                    ));
                }
            }
            "trials" => {
                if let Some(v) = parse_int::<u32>(key, value, &mut violations) {
                    if v == 0 {
                        violations.push("trials: must be at least 1".into());
                    } else {
                        trials = v;
                    }
                }
            }
            "base_seed" => {
                if let Some(v) = parse_int::<u64>(key, value, &mut violations) {
                    base_seed = v;
                }
            }
            "gamma" => {
                if let Some(v) = parse_f64(key, value, &mut violations) {
                    if v < 0.0 {
                        violations.push(format!("gamma: {v} must be >= 0"));
                    } else {
                        gamma = v;
                    }
                }
            }
            "measure" => match value.as_str() {
                "price" => measure = SweepMeasure::Price,
                "demand" => measure = SweepMeasure::Demand,
                other => violations.push(format!(
                    "measure: `{other}` is not one of price, demand"
                )),
            },
            "workers" => {
                if let Some(v) = parse_int::<usize>(key, value, &mut violations) {
                    if v == 0 {
                        violations.push("workers: must be at least 1".into());
                    } else {
                        workers = Some(v);
                    }
                }
            }
            _ => unreachable!("unknown keys rejected during the line pass"),
        }
    }

    let mut schedule = ExplorationSchedule::default();
    for (key, value) in &raw.schedule {
        let slot: &mut f64 = match key.as_str() {
            "c_trisect" => &mut schedule.c_trisect,
            "c_checkpoint" => &mut schedule.c_checkpoint,
            "checkpoint_count_scale" => &mut schedule.checkpoint_count_scale,
            "lipschitz_demand" => &mut schedule.lipschitz_demand,
            "concavity" => &mut schedule.concavity,
            "lipschitz_measure" => &mut schedule.lipschitz_measure,
            "measure_bound" => &mut schedule.measure_bound,
            "trisect_stop_width" | "xi_slack" => {
                let setting = if value == "auto" {
                    Some(None)
                } else {
                    parse_f64(key, value, &mut violations).and_then(|v| {
                        if v < 0.0 {
                            violations.push(format!("{key}: {v} must be >= 0 (or `auto`)"));
                            None
                        } else {
                            Some(Some(v))
                        }
                    })
                };
                if let Some(width) = setting {
                    if key == "trisect_stop_width" {
                        schedule.trisect_stop_width = width;
                    } else {
                        schedule.xi_slack = width;
                    }
                }
                continue;
            }
            _ => unreachable!("unknown keys rejected during the line pass"),
        };
        if let Some(v) = parse_f64(key, value, &mut violations) {
            if v <= 0.0 {
                violations.push(format!("{key}: {v} must be > 0"));
            } else {
                *slot = v;
            }
        }
    }

    for (present, key) in [
        (instance.is_some(), "instance"),
        (saw_policies, "policies"),
        (saw_lambdas, "lambdas"),
        (saw_horizons, "horizons"),
    ] {
        if !present {
            violations.push(format!("{key}: required key missing"));
        }
    }
    if saw_policies && policies.is_empty() && violations.iter().all(|v| !v.starts_with("policies")) {
        violations.push("policies: must list at least one policy".into());
    }

    if !violations.is_empty() {
        return Err(Error::Config(violations));
    }

    let config = SweepConfig {
        name,
        instance: instance.expect("checked above"),
        policies,
        lambdas,
        horizons,
        trials,
        base_seed,
        schedule,
        gamma,
        measure,
        workers,
    };
    // Belt and braces: anything the per-key checks missed still fails here.
    config.validate()?;
    Ok(config)
}
