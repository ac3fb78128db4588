//! Built-in market instances addressable by name from the CLI and sweep
//! configs.
//!
//! Fixed names:
//! - `exp-pair` — two exponential-demand groups on `[0, 5]` with
//!   unconstrained optima at prices 1 and 2.
//! - `linear-pair` — two linear-demand groups on `[0, 5]` with optima at
//!   3 and 4 (the closed-form workhorse: its constrained optimum moves
//!   linearly in lambda).
//! - `linear-tri` — three linear-demand groups with optima at 3, 3.5, 4,
//!   for the multi-group policies.
//! - `invprop-pair` — two clamped inverse-proportional groups on `[1, 8]`
//!   whose revenue plateaus (non-regular curves, grid-only solvers).
//!
//! Parameterized names:
//! - `lb-pair(A,h)` — first of the two near-indistinguishable hard
//!   instances, e.g. `lb-pair(25,0.005)`.
//! - `lb-pair-alt(A,h)` — its alternate with the shifted group-1 optimum.

use crate::demand::{
    make_lower_bound_pair, DemandCurve, DemandKind, MarketInstance, NoiseModel, PriceInterval,
};
use crate::error::{Error, Result};

/// Fixed catalog names (the parameterized `lb-pair` forms are not listed).
pub const FIXED_NAMES: [&str; 4] = ["exp-pair", "linear-pair", "linear-tri", "invprop-pair"];

fn linear(intercept: f64) -> DemandCurve {
    DemandCurve::new(DemandKind::Linear {
        slope: -0.1,
        intercept,
    })
    .expect("static curve")
}

fn exponential(rate: f64) -> DemandCurve {
    DemandCurve::new(DemandKind::Exponential {
        scale: 0.5,
        rate,
        ref_price: 1.0,
    })
    .expect("static curve")
}

fn exp_pair() -> MarketInstance {
    MarketInstance::new(
        "exp-pair",
        vec![exponential(1.0), exponential(0.5)],
        PriceInterval::new(0.0, 5.0).expect("static interval"),
        0.0,
        NoiseModel::Bernoulli,
    )
    .expect("static instance")
}

fn linear_pair() -> MarketInstance {
    MarketInstance::new(
        "linear-pair",
        vec![linear(0.6), linear(0.8)],
        PriceInterval::new(0.0, 5.0).expect("static interval"),
        0.0,
        NoiseModel::Bernoulli,
    )
    .expect("static instance")
}

fn linear_tri() -> MarketInstance {
    MarketInstance::new(
        "linear-tri",
        vec![linear(0.6), linear(0.7), linear(0.8)],
        PriceInterval::new(0.0, 5.0).expect("static interval"),
        0.0,
        NoiseModel::Bernoulli,
    )
    .expect("static instance")
}

fn invprop_pair() -> MarketInstance {
    MarketInstance::new(
        "invprop-pair",
        vec![
            DemandCurve::new(DemandKind::InverseProportional { numerator: 2.0 })
                .expect("static curve"),
            DemandCurve::new(DemandKind::InverseProportional { numerator: 4.0 })
                .expect("static curve"),
        ],
        PriceInterval::new(1.0, 8.0).expect("static interval"),
        0.0,
        NoiseModel::Bernoulli,
    )
    .expect("static instance")
}

/// Parses `base(x,y)` into `(base, x, y)`.
fn parse_two_args(name: &str) -> Option<(&str, f64, f64)> {
    let open = name.find('(')?;
    let inner = name[open + 1..].strip_suffix(')')?;
    let (a, b) = inner.split_once(',')?;
    Some((
        &name[..open],
        a.trim().parse().ok()?,
        b.trim().parse().ok()?,
    ))
}

/// Looks up an instance by catalog name.
pub fn by_name(name: &str) -> Result<MarketInstance> {
    match name {
        "exp-pair" => return Ok(exp_pair()),
        "linear-pair" => return Ok(linear_pair()),
        "linear-tri" => return Ok(linear_tri()),
        "invprop-pair" => return Ok(invprop_pair()),
        _ => {}
    }
    if let Some((base, a, h)) = parse_two_args(name) {
        match base {
            "lb-pair" => return Ok(make_lower_bound_pair(a, h)?.0),
            "lb-pair-alt" => return Ok(make_lower_bound_pair(a, h)?.1),
            _ => {}
        }
    }
    Err(Error::UnknownInstance(name.to_string()))
}
