//! Integrals over the rotated plane `(x, y)`, `y > 0`, of functions of
//! `Z0(]x~, y~])` with `x~ = (x - y)/sqrt 2` and `y~ = (x + y)/sqrt 2`.
//!
//! For fixed `y` the box `]x~, y~]` slides with `x`, and `Z0` of it is smooth between
//! the lines `x = sqrt 2 s +- y` through the singular points `s` of `Z0`: constant for
//! atoms, linear for piecewise-uniform mass. Those lines split the inner integral, and
//! their crossings `y = |s_i - s_j| / sqrt 2` split the outer one.

use std::f64::consts::{PI, SQRT_2};

use super::quad::{integrate, Quad, QuadratureSpec};
use crate::error::Result;
use crate::scsm::InitialMeasure;
use crate::special::{normal_cdf, normal_pdf, normal_sf};

/// Weight in `x` multiplying `h(Z0(box))`.
#[derive(Clone, Copy, Debug)]
pub(crate) enum XWeight {
    /// `exp(-(x - c)^2 / 2t)`.
    Gauss { center: f64, t: f64 },
    /// `1`; requires `h(0) = 0`.
    Flat,
    /// `Phi((hi - x)/sqrt t) - Phi((lo - x)/sqrt t)`; requires `h(0) = 0`.
    PhiDiff { lo: f64, hi: f64, t: f64 },
}

/// Antiderivative `G(u) = u Phi(u) + phi(u)` of `Phi`, evaluated without cancellation for `u > 0`.
pub(crate) fn g_phi(u: f64) -> f64 {
    if u > 0.0 {
        u + g_phi(-u)
    } else {
        u * normal_cdf(u) + normal_pdf(u)
    }
}

impl XWeight {
    fn at(&self, x: f64) -> f64 {
        match *self {
            XWeight::Gauss { center, t } => (-(x - center).powi(2) / (2.0 * t)).exp(),
            XWeight::Flat => 1.0,
            XWeight::PhiDiff { lo, hi, t } => {
                let s = t.sqrt();
                normal_cdf((hi - x) / s) - normal_cdf((lo - x) / s)
            }
        }
    }

    /// Exact `int_l^r w(x) dx`, where `l` may be `-inf` and `r` may be `+inf` for `Gauss`.
    fn mass(&self, l: f64, r: f64) -> f64 {
        match *self {
            XWeight::Gauss { center, t } => {
                let s = t.sqrt();
                let (ul, ur) = ((l - center) / s, (r - center) / s);
                // Difference of upper tails on the right, of CDFs on the left.
                let p = if ul > 0.0 { normal_sf(ul) - normal_sf(ur) } else { normal_cdf(ur) - normal_cdf(ul) };
                (2.0 * PI * t).sqrt() * p
            }
            XWeight::Flat => r - l,
            XWeight::PhiDiff { lo, hi, t } => {
                let s = t.sqrt();
                let part = |c: f64| s * (g_phi((c - l) / s) - g_phi((c - r) / s));
                part(hi) - part(lo)
            }
        }
    }
}

pub(crate) struct BoxIntegrator<'a> {
    pub z0: &'a InitialMeasure,
    pub spec: QuadratureSpec,
}

impl BoxIntegrator<'_> {
    /// `int dx w(x) h(Z0(]x~, y~]))` at fixed `y > 0`.
    pub fn x_integral(&self, y: f64, w: XWeight, h: &dyn Fn(f64) -> f64) -> Result<Quad> {
        let sing = self.z0.singular_points();
        let mut cuts: Vec<f64> = sing.iter().flat_map(|&s| [SQRT_2 * s - y, SQRT_2 * s + y]).collect();
        cuts.sort_by(f64::total_cmp);
        cuts.dedup();
        let h0 = h(0.0);
        let mut total = Quad::default();
        let gauss = matches!(w, XWeight::Gauss { .. });
        debug_assert!(gauss || h0 == 0.0, "unbounded weight needs h(0) = 0");
        if cuts.is_empty() {
            return Ok(Quad::exact(if gauss { h0 * w.mass(f64::NEG_INFINITY, f64::INFINITY) } else { 0.0 }));
        }
        if gauss && h0 != 0.0 {
            total.value += h0 * (w.mass(f64::NEG_INFINITY, cuts[0]) + w.mass(cuts[cuts.len() - 1], f64::INFINITY));
        }
        let zmass = |x: f64| self.z0.mass((x - y) / SQRT_2, (x + y) / SQRT_2);
        let inner = self.spec.inner();
        for c in cuts.windows(2) {
            let (l, r) = (c[0], c[1]);
            if self.z0.is_atomic() {
                let v = h(zmass(0.5 * (l + r)));
                if v != 0.0 {
                    total.value += v * w.mass(l, r);
                }
            } else {
                total = total + integrate(|x| w.at(x) * h(zmass(x)), l, r, &[], &inner)?;
            }
        }
        Ok(total)
    }

    /// Breakpoints in `y` where the arrangement of the cut lines changes.
    pub fn y_breaks(&self, extra: &[f64]) -> Vec<f64> {
        let s = self.z0.singular_points();
        let mut b: Vec<f64> = extra.to_vec();
        for i in 0..s.len() {
            for j in i + 1..s.len() {
                b.push((s[j] - s[i]).abs() / SQRT_2);
            }
        }
        b
    }

    /// `int_0^ymax dy v(y) int dx w(x) h(Z0(]x~, y~]))`.
    pub fn plane_integral(
        &self,
        ymax: f64,
        extra_breaks: &[f64],
        v: &dyn Fn(f64) -> f64,
        w: XWeight,
        h: &dyn Fn(f64) -> f64,
    ) -> Result<Quad> {
        let breaks = self.y_breaks(extra_breaks);
        let mut inner_err = 0.0f64;
        let mut failure = None;
        let q = integrate(
            |y| {
                let vy = v(y);
                if vy == 0.0 || y <= 0.0 {
                    return 0.0;
                }
                match self.x_integral(y, w, h) {
                    Ok(q) => {
                        inner_err = inner_err.max(q.error * vy.abs());
                        vy * q.value
                    }
                    Err(e) => {
                        failure.get_or_insert(e);
                        0.0
                    }
                }
            },
            0.0,
            ymax,
            &breaks,
            &self.spec,
        );
        if let Some(e) = failure {
            return Err(e);
        }
        let q = q?;
        Ok(Quad { value: q.value, error: q.error + inner_err * ymax })
    }

    /// `E h(Z0(]Y1(t), Y2(t)]))` away from coalescence, for the pair started at `(a, b)`:
    /// `(1/2 pi t) int dx int_{y>0} dy h e^{-(x - a~)^2/2t} [e^{-(y - b~)^2/2t} - e^{-(y + b~)^2/2t}]`.
    pub fn absorbed_pair(&self, a: f64, b: f64, t: f64, h: &dyn Fn(f64) -> f64) -> Result<Quad> {
        let (at, bt) = ((a + b) / SQRT_2, (b - a) / SQRT_2);
        let sd = t.sqrt();
        let ymax = bt + self.spec.radius * sd;
        let v = |y: f64| (-(y - bt).powi(2) / (2.0 * t)).exp() * -(-2.0 * y * bt / t).exp_m1();
        let extra = [(bt - self.spec.radius * sd).max(0.0), bt, bt + sd, (bt - sd).max(0.0)];
        let q = self.plane_integral(ymax, &extra, &v, XWeight::Gauss { center: at, t }, h)?;
        Ok(q.scale(1.0 / (2.0 * PI * t)))
    }

    /// `(1/(sqrt(2 pi) t^{3/2})) int_{y>0} dy y e^{-y^2/2t} int dx w(x) h`.
    pub fn rayleigh_plane(&self, t: f64, w: XWeight, h: &dyn Fn(f64) -> f64) -> Result<Quad> {
        let sd = t.sqrt();
        let v = |y: f64| y * (-(y * y) / (2.0 * t)).exp();
        let q = self.plane_integral(self.spec.radius * sd, &[sd, 2.0 * sd], &v, w, h)?;
        Ok(q.scale(1.0 / ((2.0 * PI).sqrt() * t * sd)))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn phi_antiderivative() {
        let s = QuadratureSpec::default();
        let w = XWeight::PhiDiff { lo: -0.3, hi: 1.1, t: 0.7 };
        for (l, r) in [(-3.0, -1.0), (-1.0, 2.0), (0.5, 9.0)] {
            let q = integrate(|x| w.at(x), l, r, &[], &s).unwrap();
            assert!((q.value - w.mass(l, r)).abs() < 1e-12, "{l} {r}");
        }
        let g = XWeight::Gauss { center: 0.4, t: 2.0 };
        let q = integrate(|x| g.at(x), -1.0, 30.0, &[], &s).unwrap();
        assert!((q.value - g.mass(-1.0, 30.0)).abs() < 1e-12);
        assert!((g.mass(f64::NEG_INFINITY, f64::INFINITY) - (4.0 * PI).sqrt()).abs() < 1e-14);
    }

    #[test]
    fn atomic_and_smeared_measures_agree() {
        // A nearly atomic piecewise measure gives nearly the atomic answer.
        let spec = QuadratureSpec::default();
        let h = |z: f64| (-2.0 * z).exp();
        let a = InitialMeasure::dirac(0.2, 1.0).unwrap();
        let p = InitialMeasure::uniform(0.2 - 1e-7, 0.2, 1.0).unwrap();
        let qa = BoxIntegrator { z0: &a, spec }.absorbed_pair(-1.0, 1.0, 1.0, &h).unwrap();
        let qp = BoxIntegrator { z0: &p, spec }.absorbed_pair(-1.0, 1.0, 1.0, &h).unwrap();
        assert!((qa.value - qp.value).abs() < 1e-6, "{qa:?} {qp:?}");
    }
}
