//! Exact transition laws of Feller's branching diffusion and of squared Bessel processes.
//!
//! Both laws are Poisson mixtures of Gamma variables, so a transition over any
//! time span is one Poisson draw plus at most one Gamma draw. There is no path
//! discretization anywhere in this module.

use serde::{Deserialize, Serialize};

use crate::error::{check_nonneg, check_positive, invalid, Result};
use crate::randkit::RngStream;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct FellerParams {
    /// Branching rate.
    pub gamma: f64,
}

impl FellerParams {
    pub fn new(gamma: f64) -> Result<Self> {
        check_positive("gamma", gamma)?;
        Ok(Self { gamma })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BesqParams {
    /// Dimension.
    pub delta: f64,
}

impl BesqParams {
    pub fn new(delta: f64) -> Result<Self> {
        check_nonneg("delta", delta)?;
        Ok(Self { delta })
    }
}

fn check_lambda(lambda: f64) -> Result<()> {
    if lambda.is_nan() || lambda < 0.0 {
        return Err(invalid("lambda", format!("must be >= 0, got {lambda}")));
    }
    Ok(())
}

/// `E exp(-lambda xi(t))` for Feller's process started at `x`.
/// `lambda = +inf` gives the extinction probability `exp(-2x/(gamma t))`.
pub fn feller_laplace(lambda: f64, x: f64, t: f64, gamma: f64) -> Result<f64> {
    check_lambda(lambda)?;
    check_nonneg("x", x)?;
    check_positive("t", t)?;
    check_positive("gamma", gamma)?;
    if lambda.is_infinite() {
        return Ok(feller_extinction(x, t, gamma));
    }
    Ok((-2.0 * lambda * x / (2.0 + lambda * gamma * t)).exp())
}

/// `P{xi(t) = 0}` from `x`.
pub fn feller_extinction(x: f64, t: f64, gamma: f64) -> f64 {
    (-2.0 * x / (gamma * t)).exp()
}

/// One exact Feller transition over a span `t`.
///
/// `N ~ Poisson(2x/(gamma t))`; the result is 0 if `N = 0` and otherwise a sum of `N`
/// exponentials of mean `gamma t / 2`, drawn as a single Gamma variate.
pub fn feller_transition(x: f64, t: f64, params: FellerParams, rng: &mut RngStream) -> Result<f64> {
    check_nonneg("x", x)?;
    check_positive("t", t)?;
    check_positive("gamma", params.gamma)?;
    Ok(feller_step(x, t, params.gamma, rng))
}

#[inline]
pub(crate) fn feller_step(x: f64, t: f64, gamma: f64, rng: &mut RngStream) -> f64 {
    if x == 0.0 {
        return 0.0;
    }
    let n = rng.poisson_unchecked(2.0 * x / (gamma * t));
    if n == 0 {
        return 0.0;
    }
    rng.gamma_unchecked(n as f64, 0.5 * gamma * t)
}

/// Chains exact transitions through increasing observation epochs (first epoch > 0).
pub fn feller_path(x: f64, epochs: &[f64], params: FellerParams, rng: &mut RngStream) -> Result<Vec<f64>> {
    check_nonneg("x", x)?;
    let mut out = Vec::with_capacity(epochs.len());
    let (mut now, mut value) = (0.0, x);
    for &e in epochs {
        if e.partial_cmp(&now) != Some(std::cmp::Ordering::Greater) {
            return Err(invalid("epochs", "must be strictly increasing and positive"));
        }
        value = feller_step(value, e - now, params.gamma, rng);
        now = e;
        out.push(value);
    }
    Ok(out)
}

/// `E exp(-lambda xi(t))` for BESQ of dimension `delta` started at `x`.
pub fn besq_laplace(lambda: f64, x: f64, t: f64, delta: f64) -> Result<f64> {
    check_lambda(lambda)?;
    check_nonneg("x", x)?;
    check_positive("t", t)?;
    check_nonneg("delta", delta)?;
    if lambda.is_infinite() {
        return Ok(if delta > 0.0 {
            0.0
        } else {
            (-x / (2.0 * t)).exp()
        });
    }
    let d = 1.0 + 2.0 * lambda * t;
    Ok(d.powf(-0.5 * delta) * (-lambda * x / d).exp())
}

/// One exact BESQ transition: `K ~ Poisson(x/(2t))`, result `Gamma(delta/2 + K, 2t)`.
pub fn besq_transition(x: f64, t: f64, params: BesqParams, rng: &mut RngStream) -> Result<f64> {
    check_nonneg("x", x)?;
    check_positive("t", t)?;
    check_nonneg("delta", params.delta)?;
    Ok(besq_step(x, t, params.delta, rng))
}

#[inline]
pub(crate) fn besq_step(x: f64, t: f64, delta: f64, rng: &mut RngStream) -> f64 {
    let k = if x == 0.0 {
        0
    } else {
        rng.poisson_unchecked(x / (2.0 * t))
    };
    let shape = 0.5 * delta + k as f64;
    if shape == 0.0 {
        return 0.0;
    }
    rng.gamma_unchecked(shape, 2.0 * t)
}
