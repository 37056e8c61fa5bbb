use serde::{Deserialize, Serialize};

use super::measure::{DimensionSpec, InitialMeasure, IntervalUnion};
use super::system::{simulate_zm, ParticleSystem, SystemParams};
use crate::contcoal::{advance_blocks, FreeBlocks};
use crate::error::{check_positive, invalid, Result};
use crate::randkit::RngStream;
use crate::stats::{mc_mean, replicate_map, two_sample_z, McEstimate};

/// Replicate count and seed of a Monte Carlo experiment.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct McConfig {
    pub replicates: u64,
    pub seed: u64,
}

impl McConfig {
    pub fn new(replicates: u64, seed: u64) -> Result<Self> {
        if replicates < 2 {
            return Err(invalid("replicates", "must be >= 2"));
        }
        Ok(Self { replicates, seed })
    }
}

/// Two estimates of the same quantity and their z-score.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PairReport {
    pub a: McEstimate,
    pub b: McEstimate,
    pub z: f64,
}

impl PairReport {
    pub fn new(a: McEstimate, b: McEstimate) -> Result<Self> {
        let z = two_sample_z(&a, &b)?;
        Ok(Self { a, b, z })
    }
}

/// Backward boxes: the endpoints run as a coalescing Brownian motion for time `t`.
pub fn dual_boxes(u: &IntervalUnion, t: f64, step: f64, rng: &mut RngStream) -> Result<IntervalUnion> {
    check_positive("t", t)?;
    check_positive("step", step)?;
    Ok(dual_boxes_unchecked(u, t, step, rng))
}

pub(crate) fn dual_boxes_unchecked(u: &IntervalUnion, t: f64, step: f64, rng: &mut RngStream) -> IntervalUnion {
    if u.is_empty() {
        return u.clone();
    }
    let mut blocks = FreeBlocks::from_sorted(u.ends());
    advance_blocks(&mut blocks, t, step, rng).expect("validated");
    let mut ends = Vec::with_capacity(u.ends().len());
    for (&p, &s) in blocks.pos.iter().zip(&blocks.size) {
        ends.extend(std::iter::repeat_n(p, s));
    }
    u.with_ends(ends)
}

/// Weight of a backward box in the Laplace dual: `2a / (2 + gamma t a)`, and `2/(gamma t)`
/// in the limit `a = inf`.
pub fn dual_weight(a: f64, gamma_t: f64) -> f64 {
    if a.is_infinite() { 2.0 / gamma_t } else { 2.0 * a / (2.0 + gamma_t * a) }
}

/// `sum_j c_j Z0(]Y_{2j-1}, Y_{2j}])`.
fn dual_functional(z0: &InitialMeasure, boxes: &IntervalUnion, weight: impl Fn(f64) -> f64) -> f64 {
    boxes.intervals().map(|(a, b, w)| weight(w) * z0.mass(a, b)).sum()
}

fn require_mass(z0: &InitialMeasure) -> Result<()> {
    if z0.total_mass() <= 0.0 {
        return Err(invalid("z0", "total mass must be positive"));
    }
    Ok(())
}

/// `E exp(-sum_j a_j Z^(m)_t(]y_{2j-1}, y_{2j}]))` by direct simulation.
pub fn laplace_lhs_mc(z0: &InitialMeasure, p: &SystemParams, u: &IntervalUnion, mc: McConfig) -> Result<McEstimate> {
    p.validate()?;
    require_mass(z0)?;
    if u.all_zero() {
        return Ok(McEstimate::from_samples(&vec![1.0; mc.replicates as usize], mc.seed, "laplace-lhs"));
    }
    Ok(mc_mean(mc.seed, "laplace-lhs", mc.replicates, |rng| {
        let z = simulate_zm(z0, p, rng).expect("validated");
        (-z.weighted_mass(u)).exp()
    }))
}

/// `E exp(-int Z0(dx) 2I(x)/(2 + gamma t I(x)))` with `I` the weighted indicator of the
/// backward boxes. Only `gamma`, `t` and `step` of `p` are used.
pub fn laplace_rhs_mc(z0: &InitialMeasure, p: &SystemParams, u: &IntervalUnion, mc: McConfig) -> Result<McEstimate> {
    p.validate()?;
    let gt = p.gamma * p.t;
    Ok(mc_mean(mc.seed, "laplace-rhs", mc.replicates, |rng| {
        if u.all_zero() {
            return 1.0;
        }
        let boxes = dual_boxes_unchecked(u, p.t, p.step, rng);
        (-dual_functional(z0, &boxes, |a| dual_weight(a, gt))).exp()
    }))
}

pub fn laplace_check(z0: &InitialMeasure, p: &SystemParams, u: &IntervalUnion, mc: McConfig) -> Result<PairReport> {
    let a = laplace_lhs_mc(z0, p, u, mc)?;
    let b = laplace_rhs_mc(z0, p, u, mc)?;
    PairReport::new(a, b)
}

/// First and second moments of `Z_t(f)` for `f = sum_j a_j 1{]y_{2j-1}, y_{2j}]}`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MomentReport {
    pub first: PairReport,
    /// Against the exact finite-`m` dual: `(1 - 1/m) Z0(g)^2 + (z/m + gamma t) Z0(g^2)`.
    pub second: PairReport,
    /// Against the `m = inf` dual: `Z0(g)^2 + gamma t Z0(g^2)`.
    pub second_limit: PairReport,
}

pub fn moment_check(z0: &InitialMeasure, p: &SystemParams, u: &IntervalUnion, mc: McConfig) -> Result<MomentReport> {
    p.validate()?;
    require_mass(z0)?;
    if u.weights().iter().any(|w| w.is_infinite()) {
        return Err(invalid("weights", "must be finite for moments"));
    }
    let lhs = replicate_map(mc.seed, "moments-lhs", mc.replicates, |rng| {
        let z = simulate_zm(z0, p, rng).expect("validated");
        let f = z.weighted_mass(u);
        (f, f * f)
    });
    let (m, zbar, gt) = (p.m as f64, z0.total_mass(), p.gamma * p.t);
    let rhs = replicate_map(mc.seed, "moments-rhs", mc.replicates, |rng| {
        let boxes = dual_boxes_unchecked(u, p.t, p.step, rng);
        let g = dual_functional(z0, &boxes, |a| a);
        let g2 = dual_functional(z0, &boxes, |a| a * a);
        (g, (1.0 - 1.0 / m) * g * g + (zbar / m + gt) * g2, g * g + gt * g2)
    });
    let est = |xs: Vec<f64>, label: &str| McEstimate::from_samples(&xs, mc.seed, label);
    let l1 = est(lhs.iter().map(|x| x.0).collect(), "moments-lhs");
    let l2 = est(lhs.iter().map(|x| x.1).collect(), "moments-lhs");
    let r1 = est(rhs.iter().map(|x| x.0).collect(), "moments-rhs");
    let r2 = est(rhs.iter().map(|x| x.1).collect(), "moments-rhs");
    let r2_lim = est(rhs.iter().map(|x| x.2).collect(), "moments-rhs");
    Ok(MomentReport {
        first: pair_or_equal(l1, r1)?,
        second: pair_or_equal(l2.clone(), r2)?,
        second_limit: pair_or_equal(l2, r2_lim)?,
    })
}

/// Like `PairReport::new`, but two exact zeros compare as equal.
fn pair_or_equal(a: McEstimate, b: McEstimate) -> Result<PairReport> {
    if a.std_error == 0.0 && b.std_error == 0.0 && a.mean == b.mean {
        return Ok(PairReport { a, b, z: 0.0 });
    }
    PairReport::new(a, b)
}

/// `P{supp Z_t misses U}` by simulation against `E exp(-(2/(gamma t)) Z0(union of backward boxes))`.
pub fn cox_avoidance_check(z0: &InitialMeasure, p: &SystemParams, u: &IntervalUnion, mc: McConfig) -> Result<PairReport> {
    let hit = u.reweighted(vec![f64::INFINITY; u.len()])?;
    let a = mc_mean(mc.seed, "avoid-lhs", mc.replicates, |rng| {
        let z = simulate_zm(z0, p, rng).expect("validated");
        f64::from(u8::from(z.weighted_mass(&hit) == 0.0))
    });
    p.validate()?;
    let b = laplace_rhs_mc(z0, p, &hit, McConfig { seed: mc.seed ^ 0x5bd1_e995, ..mc })?;
    pair_or_equal(a, b)
}

/// Squared Bessel model duality: (A) direct simulation, (B) the finite-`m` dual with
/// fixed initial positions and dimensions, (C) the `m = inf` formula.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BesqDualityReport {
    pub direct: McEstimate,
    pub finite_dual: McEstimate,
    pub limit: McEstimate,
    pub z_direct_finite: f64,
    pub z_direct_limit: f64,
}

pub struct BesqExperiment<'a> {
    pub z0: &'a InitialMeasure,
    pub delta0: &'a DimensionSpec,
    pub m: usize,
    pub t: f64,
    pub step: f64,
    /// Boxes with their mass weights `alpha_j`.
    pub alpha: &'a IntervalUnion,
    /// Dimension weights `beta_j` on the same boxes.
    pub beta: &'a [f64],
}

pub fn besq_duality_check(e: &BesqExperiment<'_>, mc: McConfig) -> Result<BesqDualityReport> {
    require_mass(e.z0)?;
    if e.m == 0 {
        return Err(invalid("m", "must be >= 1"));
    }
    check_positive("t", e.t)?;
    check_positive("step", e.step)?;
    let u = e.alpha;
    if e.beta.len() != u.len() || e.beta.iter().any(|b| !(b.is_finite() && *b >= 0.0)) {
        return Err(invalid("beta", "need one finite weight >= 0 per box"));
    }
    if u.weights().iter().any(|w| w.is_infinite()) {
        return Err(invalid("alpha", "must be finite"));
    }
    let beta = u.reweighted(e.beta.to_vec())?;
    let (t, m) = (e.t, e.m);
    let direct = mc_mean(mc.seed, "besq-direct", mc.replicates, |rng| {
        let mut sys = ParticleSystem::besq(e.z0, e.delta0, m, rng).expect("validated");
        sys.advance(t, e.step, rng).expect("validated");
        (-sys.measure().weighted_mass(u) - sys.dimension_measure().weighted_mass(&beta)).exp()
    });
    let zbar = e.z0.total_mass();
    let scale = e.delta0.delta_bar() / m as f64;
    let finite_dual = mc_mean(mc.seed, "besq-finite", mc.replicates, |rng| {
        let xs = e.z0.sample_sorted_unchecked(m, rng);
        let boxes = dual_boxes_unchecked(u, t, e.step, rng);
        let mut log = 0.0;
        for &x in &xs {
            let d = e.delta0.draw(rng) * scale;
            let (i, j) = box_weights(&boxes, e.beta, x);
            log -= 0.5 * d * (2.0 * t * i).ln_1p() + (zbar / m as f64) * i / (1.0 + 2.0 * t * i) + d * j;
        }
        log.exp()
    });
    let mu = e.delta0.mu();
    let limit = mc_mean(mc.seed, "besq-limit", mc.replicates, |rng| {
        let boxes = dual_boxes_unchecked(u, t, e.step, rng);
        let s: f64 = boxes
            .intervals()
            .zip(e.beta)
            .map(|((a, b, al), &be)| {
                let c = mu / (2.0 * zbar) * (2.0 * t * al).ln_1p() + al / (1.0 + 2.0 * t * al) + mu / zbar * be;
                c * e.z0.mass(a, b)
            })
            .sum();
        (-s).exp()
    });
    let z_direct_finite = pair_or_equal(direct.clone(), finite_dual.clone())?.z;
    let z_direct_limit = pair_or_equal(direct.clone(), limit.clone())?.z;
    Ok(BesqDualityReport { direct, finite_dual, limit, z_direct_finite, z_direct_limit })
}

/// `(I(x), J(x))`: the weights of the backward box containing `x`, if any.
fn box_weights(boxes: &IntervalUnion, beta: &[f64], x: f64) -> (f64, f64) {
    for ((a, b, al), &be) in boxes.intervals().zip(beta) {
        if a < x && x <= b {
            return (al, be);
        }
    }
    (0.0, 0.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::special::normal_cdf;

    fn dirac() -> InitialMeasure {
        InitialMeasure::dirac(0.0, 1.0).unwrap()
    }

    #[test]
    fn zero_weights_give_one() {
        let p = SystemParams::new(8, 1.0, 1.0, 1e-2).unwrap();
        let u = IntervalUnion::single(-1.0, 1.0, 0.0).unwrap();
        let mc = McConfig::new(100, 1).unwrap();
        for e in [laplace_lhs_mc(&dirac(), &p, &u, mc).unwrap(), laplace_rhs_mc(&dirac(), &p, &u, mc).unwrap()] {
            assert_eq!((e.mean, e.std_error), (1.0, 0.0));
        }
        let r = moment_check(&dirac(), &p, &u, mc).unwrap();
        assert_eq!((r.first.a.mean, r.first.b.mean, r.second.z), (0.0, 0.0, 0.0));
        let c = cox_avoidance_check(&dirac(), &p, &IntervalUnion::empty(), mc).unwrap();
        assert_eq!((c.a.mean, c.b.mean), (1.0, 1.0));
        let d0 = DimensionSpec::new(InitialMeasure::dirac(2.0, 1.0).unwrap()).unwrap();
        let e = BesqExperiment { z0: &dirac(), delta0: &d0, m: 8, t: 1.0, step: 1e-2, alpha: &u, beta: &[0.0] };
        let r = besq_duality_check(&e, mc).unwrap();
        assert_eq!((r.direct.mean, r.finite_dual.mean, r.limit.mean), (1.0, 1.0, 1.0));
    }

    #[test]
    fn huge_weight_approaches_avoidance() {
        let p = SystemParams::new(16, 1.0, 1.0, 1e-2).unwrap();
        let mc = McConfig::new(100_000, 2).unwrap();
        let u = IntervalUnion::single(-1.0, 1.0, 1e6).unwrap();
        let lhs = laplace_lhs_mc(&dirac(), &p, &u, mc).unwrap();
        let inf = IntervalUnion::single(-1.0, 1.0, f64::INFINITY).unwrap();
        let rhs = laplace_rhs_mc(&dirac(), &p, &inf, McConfig::new(100_000, 3).unwrap()).unwrap();
        assert!(two_sample_z(&lhs, &rhs).unwrap().abs() < 3.0, "{lhs:?} {rhs:?}");
    }

    #[test]
    fn small_time_recovers_initial_functional() {
        let z0 = InitialMeasure::uniform(0.0, 2.0, 1.5).unwrap();
        let p = SystemParams::new(16, 1.0, 1e-4, 1e-6).unwrap();
        let u = IntervalUnion::new(vec![0.0, 1.0, 1.5, 3.0], vec![1.0, 2.0]).unwrap();
        let e = laplace_rhs_mc(&z0, &p, &u, McConfig::new(20_000, 4).unwrap()).unwrap();
        let exact = (-(0.75 + 2.0 * 0.375f64)).exp();
        assert!((e.mean - exact).abs() < 3.0 * e.std_error + 5e-3, "{e:?} {exact}");
    }

    #[test]
    fn prop_four_one_limit() {
        // a = inf: E exp(-(2/(gamma t)) Z0(]Y1, Y2]))
        let z0 = dirac();
        let p = SystemParams::new(1, 1.0, 1.0, 1e-2).unwrap();
        let inf = IntervalUnion::single(-1.0, 1.0, f64::INFINITY).unwrap();
        let e = laplace_rhs_mc(&z0, &p, &inf, McConfig::new(200_000, 5).unwrap()).unwrap();
        // With Z0 = delta_0, the dual box covers 0 with probability Phi(1) - Phi(-1).
        let cover = normal_cdf(1.0) - normal_cdf(-1.0);
        let exact = 1.0 - cover * (1.0 - (-2.0f64).exp());
        assert!(two_sample_z(&e, &McEstimate::constant(exact)).unwrap().abs() < 3.0, "{e:?} {exact}");
    }

    #[test]
    fn moments_match() {
        let p = SystemParams::new(32, 1.0, 1.0, 1e-3).unwrap();
        let u = IntervalUnion::single(-1.0, 1.0, 1.0).unwrap();
        let r = moment_check(&dirac(), &p, &u, McConfig::new(100_000, 6).unwrap()).unwrap();
        assert!(r.first.z.abs() < 3.0 && r.second.z.abs() < 3.0 && r.second_limit.z.abs() < 3.0, "{r:?}");
        let z0 = InitialMeasure::atoms(&[(-0.5, 0.6), (0.5, 0.4)]).unwrap();
        let u = IntervalUnion::new(vec![-1.0, 0.0, 0.2, 1.0], vec![1.0, 0.5]).unwrap();
        let p = SystemParams::new(4, 1.0, 0.5, 1e-3).unwrap();
        let r = moment_check(&z0, &p, &u, McConfig::new(100_000, 7).unwrap()).unwrap();
        assert!(r.first.z.abs() < 3.0 && r.second.z.abs() < 3.0, "{r:?}");
    }

    #[test]
    fn avoidance_two_boxes() {
        let z0 = InitialMeasure::uniform(-1.0, 1.0, 1.0).unwrap();
        let p = SystemParams::new(32, 1.0, 1.0, 1e-3).unwrap();
        let u = IntervalUnion::new(vec![-1.5, -0.5, 0.0, 1.0], vec![1.0, 1.0]).unwrap();
        let r = cox_avoidance_check(&z0, &p, &u, McConfig::new(20_000, 8).unwrap()).unwrap();
        assert!(r.z.abs() < 3.0, "{r:?}");
    }

    #[test]
    fn besq_finite_identity_and_beta_only() {
        let z0 = InitialMeasure::atoms(&[(-0.5, 0.5), (0.5, 0.5)]).unwrap();
        let d0 = DimensionSpec::new(InitialMeasure::atoms(&[(1.0, 1.0), (3.0, 1.0)]).unwrap()).unwrap();
        let u = IntervalUnion::single(-1.0, 0.7, 1.0).unwrap();
        let e = BesqExperiment { z0: &z0, delta0: &d0, m: 8, t: 1.0, step: 1e-2, alpha: &u, beta: &[0.5] };
        let r = besq_duality_check(&e, McConfig::new(50_000, 9).unwrap()).unwrap();
        assert!(r.z_direct_finite.abs() < 3.0, "{r:?}");
        // beta only: the dimension measure moves like a gamma = 0 system.
        let u0 = u.reweighted(vec![0.0]).unwrap();
        let e = BesqExperiment { alpha: &u0, m: 400, ..e };
        let r = besq_duality_check(&e, McConfig::new(20_000, 10).unwrap()).unwrap();
        assert!(r.z_direct_limit.abs() < 3.0, "{r:?}");
    }
}
