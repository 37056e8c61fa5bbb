use std::f64::consts::SQRT_2;

use serde::{Deserialize, Serialize};

use super::kernel::{g_phi, BoxIntegrator, XWeight};
use super::quad::{integrate, Quad, QuadratureSpec};
use crate::error::{check_nonneg, check_positive, invalid, Result};
use crate::scsm::InitialMeasure;
use crate::special::{erfc, normal_cdf};

/// The rotated coordinates of a point `(x, y)` and an interval `(a, b)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TiltedCoords {
    pub x: f64,
    pub y: f64,
    pub a: f64,
    pub b: f64,
}

pub fn rotate_coords(x: f64, y: f64, a: f64, b: f64) -> TiltedCoords {
    TiltedCoords { x: (x - y) / SQRT_2, y: (x + y) / SQRT_2, a: (a + b) / SQRT_2, b: (b - a) / SQRT_2 }
}

/// Boundary-atom factor used by `tau_cdf` and `last_particle_range`.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FormulaVariant {
    /// Derived from the dual representation; the default.
    #[default]
    Corrected,
    /// The older boundary factor, kept for comparison. It disagrees with
    /// simulation and can exceed 1.
    Uncorrected,
}

fn check_interval(a: f64, b: f64) -> Result<()> {
    if !(a.is_finite() && b.is_finite() && a < b) {
        return Err(invalid("a/b", format!("need finite a < b, got ({a}, {b})")));
    }
    Ok(())
}

fn checks(t: f64, gamma: f64, q: &QuadratureSpec) -> Result<()> {
    check_positive("t", t)?;
    check_positive("gamma", gamma)?;
    q.validate()
}

/// `P{Z_t(]a, b]) = 0}`.
pub fn prob_interval_empty(z0: &InitialMeasure, a: f64, b: f64, t: f64, gamma: f64, q: &QuadratureSpec) -> Result<Quad> {
    check_interval(a, b)?;
    checks(t, gamma, q)?;
    let k = 2.0 / (gamma * t);
    let bi = BoxIntegrator { z0, spec: *q };
    let body = bi.absorbed_pair(a, b, t, &|z| (-k * z).exp())?;
    Ok(body + Quad::exact(erfc((b - a) / (2.0 * t.sqrt()))))
}

/// `E #(S_t intersected with ]a, b])`.
pub fn expected_support_count(z0: &InitialMeasure, a: f64, b: f64, t: f64, gamma: f64, q: &QuadratureSpec) -> Result<Quad> {
    check_interval(a, b)?;
    checks(t, gamma, q)?;
    let k = 2.0 / (gamma * t);
    let bi = BoxIntegrator { z0, spec: *q };
    let w = XWeight::PhiDiff { lo: SQRT_2 * a, hi: SQRT_2 * b, t };
    bi.rayleigh_plane(t, w, &|z| -(-k * z).exp_m1())
}

/// `E[exp(-lambda Z_t(]a, b])); Z_t(]a, b]) > 0]`; `lambda = inf` gives 0.
pub fn point_mass_laplace_interval(
    z0: &InitialMeasure,
    a: f64,
    b: f64,
    t: f64,
    gamma: f64,
    lambda: f64,
    q: &QuadratureSpec,
) -> Result<Quad> {
    check_interval(a, b)?;
    checks(t, gamma, q)?;
    if lambda.is_nan() || lambda < 0.0 {
        return Err(invalid("lambda", "must be >= 0"));
    }
    if lambda.is_infinite() {
        return Ok(Quad::exact(0.0));
    }
    let (k, kl) = (2.0 / (gamma * t), 2.0 * lambda / (2.0 + lambda * gamma * t));
    let bi = BoxIntegrator { z0, spec: *q };
    bi.absorbed_pair(a, b, t, &|z| (-kl * z).exp() - (-k * z).exp())
}

/// `E[exp(-lambda Z_t(R)); Z_t != 0, S_t within (a, b)]`.
#[allow(clippy::too_many_arguments)]
pub fn last_particle_range(
    z0: &InitialMeasure,
    a: f64,
    b: f64,
    t: f64,
    gamma: f64,
    lambda: f64,
    variant: FormulaVariant,
    q: &QuadratureSpec,
) -> Result<Quad> {
    check_interval(a, b)?;
    checks(t, gamma, q)?;
    check_nonneg("lambda", lambda)?;
    let zbar = z0.total_mass();
    let (k, kl) = (2.0 / (gamma * t), 2.0 * lambda / (2.0 + lambda * gamma * t));
    let bi = BoxIntegrator { z0, spec: *q };
    let body = bi.absorbed_pair(a, b, t, &|z| (-kl * z - k * (zbar - z).max(0.0)).exp())?;
    let boundary_mass = match variant {
        FormulaVariant::Corrected => zbar,
        FormulaVariant::Uncorrected => 1.0,
    };
    let boundary = (-k * boundary_mass).exp() * erfc((b - a) / (2.0 * t.sqrt()));
    Ok(body + Quad::exact(boundary - (-k * zbar).exp()))
}

/// `P{tau < t}` for the first time at most one atom remains.
pub fn tau_cdf(z0: &InitialMeasure, t: f64, gamma: f64, variant: FormulaVariant, q: &QuadratureSpec) -> Result<Quad> {
    checks(t, gamma, q)?;
    let zbar = z0.total_mass();
    let k = 2.0 / (gamma * t);
    let bi = BoxIntegrator { z0, spec: *q };
    // The z-integral is done in closed form; what remains is the excess of the
    // one-atom kernel over its value for an empty box.
    let ext = (-k * zbar).exp();
    let body = bi.rayleigh_plane(t, XWeight::Flat, &|z| (-k * (zbar - z).max(0.0)).exp() - ext)?;
    let tail = match variant {
        FormulaVariant::Corrected => ext,
        FormulaVariant::Uncorrected => 1.0 - (k * zbar).exp(),
    };
    Ok(body + Quad::exact(tail))
}

/// `P{T <= t} = exp(-2 zbar / (gamma t))`.
pub fn t_extinction_cdf(zbar: f64, gamma: f64, t: f64) -> Result<f64> {
    check_nonneg("zbar", zbar)?;
    check_positive("gamma", gamma)?;
    check_positive("t", t)?;
    Ok((-2.0 * zbar / (gamma * t)).exp())
}

/// `P{F <= z}`, the law of a Brownian motion from `Z0 / zbar` read at an independent
/// time `T` with `P{T <= t} = exp(-2 zbar / (gamma t))`.
///
/// `1/T` is exponential with rate `c = 2 zbar / gamma`; writing `1/T = w^2` gives the
/// smooth integrand `2 c w e^{-c w^2} E Phi((z - x0) w)`.
pub fn f_location_cdf(z0: &InitialMeasure, gamma: f64, z: f64, q: &QuadratureSpec) -> Result<Quad> {
    check_positive("gamma", gamma)?;
    q.validate()?;
    let zbar = z0.total_mass();
    if zbar <= 0.0 {
        return Err(invalid("z0", "total mass must be positive"));
    }
    if z.is_infinite() {
        return Ok(Quad::exact(if z > 0.0 { 1.0 } else { 0.0 }));
    }
    let c = 2.0 * zbar / gamma;
    let atoms = z0.atom_list();
    let pieces = z0.pieces();
    let h = |w: f64| -> f64 {
        let a: f64 = atoms.iter().map(|&(x, m)| m * normal_cdf((z - x) * w)).sum();
        let p: f64 = pieces
            .iter()
            .map(|&(l, r, m)| {
                if m == 0.0 {
                    0.0
                } else if w * (r - l) < 1e-6 {
                    m * normal_cdf((z - 0.5 * (l + r)) * w)
                } else {
                    m * (g_phi((z - l) * w) - g_phi((z - r) * w)) / (w * (r - l))
                }
            })
            .sum();
        (a + p) / zbar
    };
    let wmax = ((q.radius * q.radius * 0.5 + 5.0) / c).sqrt();
    let scale = c.sqrt().recip();
    integrate(|w| 2.0 * c * w * (-c * w * w).exp() * h(w), 0.0, wmax, &[scale, 2.0 * scale], q)
}

/// `int_0^t P{Z_s(]a, b]) = 0} ds`.
pub fn occupation_zero(z0: &InitialMeasure, a: f64, b: f64, t: f64, gamma: f64, q: &QuadratureSpec) -> Result<Quad> {
    check_interval(a, b)?;
    checks(t, gamma, q)?;
    // s = t w^2 removes the square-root behaviour at s = 0.
    let inner = q.inner();
    let mut failure = None;
    let qv = integrate(
        |w| {
            let s = t * w * w;
            if s == 0.0 {
                return 0.0;
            }
            match prob_interval_empty(z0, a, b, s, gamma, &inner) {
                Ok(p) => 2.0 * t * w * p.value,
                Err(e) => {
                    failure.get_or_insert(e);
                    0.0
                }
            }
        },
        0.0,
        1.0,
        &[],
        q,
    );
    if let Some(e) = failure {
        return Err(e);
    }
    qv
}
