use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use super::config::{
    config_err, default_step, BesqDualityParams, BmParams, ClosedFormParams, FlowParams, Formula, GeneratorSweep,
    LatticeParams, MassProcess, OracleSpec, PathParams, SampleParams, ScsmParams,
};
use super::report::{Row, Z_MAX};
use crate::branchkit::{besq_laplace, besq_transition, feller_extinction, feller_laplace, feller_transition};
use crate::branchkit::{BesqParams, FellerParams};
use crate::closedform::{self as cf, FormulaVariant, Quad, QuadratureSpec};
use crate::contcoal::{advance_blocks, flow_grid, BmState};
use crate::error::Result;
use crate::latticecoal::{
    array_law_oracle, check_generator_duality, indicator_backward, indicator_forward, simulate_cw, Lattice,
    LatticeState,
};
use crate::randkit::RngStream;
use crate::scsm::{
    besq_duality_check, cox_avoidance_check, flow_construct_zt, flow_covers, laplace_check, moment_check,
    path_stats, simulate_zm, BesqExperiment, InitialMeasure, McConfig, ParticleSystem, SystemParams,
};
use crate::stats::{chi_square_two_sample, ks_test, replicate_map, McEstimate};

/// Seed and replicate budget shared by every side of one experiment.
#[derive(Clone, Copy, Debug)]
pub struct Budget {
    pub seed: u64,
    pub replicates: u64,
}

impl Budget {
    fn mc(self) -> Result<McConfig> {
        McConfig::new(self.replicates, self.seed)
    }
}

fn collect<T>(v: Vec<Result<T>>) -> Result<Vec<T>> {
    v.into_iter().collect()
}

fn counts(codes: &[usize], cells: usize) -> Vec<u64> {
    let mut c = vec![0u64; cells];
    for &k in codes {
        c[k] += 1;
    }
    c
}

pub fn sample(p: &SampleParams, b: Budget) -> Result<Vec<Row>> {
    let (x, t) = (p.x, p.t);
    let draws = match p.process {
        MassProcess::Feller => {
            let fp = FellerParams::new(p.gamma.unwrap_or(f64::NAN))?;
            collect(replicate_map(b.seed, "sample-feller", b.replicates, |rng| feller_transition(x, t, fp, rng)))?
        }
        MassProcess::Besq => {
            let bp = BesqParams::new(p.delta.unwrap_or(f64::NAN))?;
            collect(replicate_map(b.seed, "sample-besq", b.replicates, |rng| besq_transition(x, t, bp, rng)))?
        }
    };
    let est = |f: &dyn Fn(f64) -> f64, label: &str| {
        let v: Vec<f64> = draws.iter().map(|&d| f(d)).collect();
        McEstimate::from_samples(&v, b.seed, label)
    };
    let zero = |d: f64| f64::from(u8::from(d == 0.0));
    let mut rows = Vec::new();
    match p.process {
        MassProcess::Feller => {
            let g = p.gamma.expect("validated");
            rows.push(Row::z_const("P{xi(t) = 0}", &est(&zero, "zero"), feller_extinction(x, t, g)));
            rows.push(Row::z_const("mean", &est(&|d| d, "mean"), x));
            for &l in &p.lambdas {
                let e = est(&|d| (-l * d).exp(), "laplace");
                rows.push(Row::z_const(format!("laplace lambda={l}"), &e, feller_laplace(l, x, t, g)?));
            }
        }
        MassProcess::Besq => {
            let d = p.delta.expect("validated");
            if d == 0.0 {
                rows.push(Row::z_const("P{X(t) = 0}", &est(&zero, "zero"), (-x / (2.0 * t)).exp()));
            }
            rows.push(Row::z_const("mean", &est(&|v| v, "mean"), x + d * t));
            for &l in &p.lambdas {
                let e = est(&|v| (-l * v).exp(), "laplace");
                rows.push(Row::z_const(format!("laplace lambda={l}"), &e, besq_laplace(l, x, t, d)?));
            }
        }
    }
    Ok(rows)
}

pub fn duality_lattice(p: &LatticeParams, b: Budget) -> Result<Vec<Row>> {
    let x0 = LatticeState::new(&p.x, Lattice::Integer).map_err(|e| config_err("params.x", e.to_string()))?;
    let y0 = LatticeState::new(&p.y, Lattice::HalfInteger).map_err(|e| config_err("params.y", e.to_string()))?;
    let oracle = array_law_oracle(&p.x, p.p, p.t, &p.y, p.truncation_radius, p.jump_cap, f64::INFINITY)?;
    let cells = oracle.probs.len();
    let fwd = collect(replicate_map(b.seed, "lattice-forward", b.replicates, |rng| {
        let s = simulate_cw(&x0, p.p, p.t, rng)?;
        Ok(indicator_forward(&s, &p.y)?.code())
    }))?;
    let bwd = collect(replicate_map(b.seed, "lattice-backward", b.replicates, |rng| {
        let s = simulate_cw(&y0, 1.0 - p.p, p.t, rng)?;
        Ok(indicator_backward(&p.x, &s)?.code())
    }))?;
    let (cf, cb) = (counts(&fwd, cells), counts(&bwd, cells));
    let n = b.replicates as f64;
    let worst = |c: &[u64]| c.iter().zip(&oracle.probs).map(|(&k, &q)| (k as f64 / n - q).abs()).fold(0.0, f64::max);
    let mut rows = vec![
        Row::chi2("array law: forward vs backward", &chi_square_two_sample(&cf, &cb)?),
        Row::bound("max cell |forward - oracle|", worst(&cf), p.cell_tolerance),
        Row::bound("max cell |backward - oracle|", worst(&cb), p.cell_tolerance),
        Row::bound("oracle error bound", oracle.error_bound, p.oracle_tolerance),
    ];
    if let Some(g) = &p.generator {
        rows.push(generator_sweep(g, b.seed)?);
    }
    Ok(rows)
}

fn lattice_points(lo: f64, hi: f64, half: bool) -> Vec<f64> {
    let off = if half { 0.5 } else { 0.0 };
    let first = (lo - off).ceil() as i64;
    let last = (hi - off).floor() as i64;
    (first..=last).map(|k| k as f64 + off).collect()
}

fn nondecreasing(points: &[f64], len: usize) -> Vec<Vec<f64>> {
    let mut out = vec![vec![]];
    for _ in 0..len {
        out = out
            .into_iter()
            .flat_map(|v: Vec<f64>| {
                let start = v.last().map_or(0, |&l| points.iter().position(|&p| p == l).expect("own point"));
                points[start..].iter().map(move |&p| {
                    let mut w = v.clone();
                    w.push(p);
                    w
                })
            })
            .collect();
    }
    out
}

/// Worst generator-duality defect over every configuration in the window and
/// `functions` random test functions per configuration and `p`.
pub fn generator_sweep(g: &GeneratorSweep, seed: u64) -> Result<Row> {
    let ints = lattice_points(-g.window, g.window, false);
    let halves = lattice_points(-g.window, g.window, true);
    let mut worst: f64 = 0.0;
    let mut stream = 0u64;
    let mut values = Vec::new();
    for m in 1..=g.max_m {
        for n in 1..=g.max_n {
            let cells = 1usize << (m * (n - 1));
            for xs in nondecreasing(&ints, m) {
                let x = LatticeState::new(&xs, Lattice::Integer)?;
                for ys in nondecreasing(&halves, n) {
                    let y = LatticeState::new(&ys, Lattice::HalfInteger)?;
                    for &p in &g.p {
                        let mut rng = RngStream::for_replicate(seed, "generator-sweep", stream);
                        stream += 1;
                        for _ in 0..g.functions {
                            values.clear();
                            values.extend((0..cells).map(|_| rng.uniform()));
                            let d = check_generator_duality(&x, &y, p, &|c| values[c])?;
                            worst = worst.max(d);
                        }
                    }
                }
            }
        }
    }
    Ok(Row::bound("max |G gbar_y(x) - H gbar_x(y)|", worst, g.tolerance))
}

/// Code of `1{ball_i in ]box_j, box_{j+1}]}`, bit `i * cols + j`.
fn box_code(balls: &[f64], boxes: &[f64]) -> usize {
    let cols = boxes.len().saturating_sub(1);
    let mut code = 0;
    for (i, &x) in balls.iter().enumerate() {
        let j = boxes.partition_point(|&y| y < x);
        if j >= 1 && j <= cols && x <= boxes[j] {
            code |= 1 << (i * cols + j - 1);
        }
    }
    code
}

fn run_bm(start: &[f64], t: f64, step: f64, rng: &mut RngStream) -> Result<Vec<f64>> {
    let mut blocks = BmState::new(start)?.to_blocks();
    advance_blocks(&mut blocks, t, step, rng)?;
    Ok(BmState::from_blocks(&blocks, t).positions().to_vec())
}

pub fn duality_bm(p: &BmParams, b: Budget) -> Result<Vec<Row>> {
    let (m, n) = (p.x.len(), p.y.len());
    if m * (n - 1) > 16 {
        return Err(config_err("params.x", "m (n - 1) must be at most 16"));
    }
    let step = default_step(p.step, p.t);
    let cells = 1usize << (m * (n - 1));
    let fwd = collect(replicate_map(b.seed, "bm-forward", b.replicates, |rng| {
        Ok(box_code(&run_bm(&p.x, p.t, step, rng)?, &p.y))
    }))?;
    let bwd = collect(replicate_map(b.seed, "bm-backward", b.replicates, |rng| {
        Ok(box_code(&p.x, &run_bm(&p.y, p.t, step, rng)?))
    }))?;
    let mut rows = vec![Row::chi2(
        "array law: forward vs backward",
        &chi_square_two_sample(&counts(&fwd, cells), &counts(&bwd, cells))?,
    )];
    if m == 1 {
        let s = p.t.sqrt();
        for j in 0..n - 1 {
            let exact = crate::special::normal_cdf((p.y[j + 1] - p.x[0]) / s) - crate::special::normal_cdf((p.y[j] - p.x[0]) / s);
            let hits: Vec<f64> = bwd.iter().map(|&c| f64::from(u8::from(c >> j & 1 == 1))).collect();
            let e = McEstimate::from_samples(&hits, b.seed, "bm-backward");
            rows.push(Row::z_const(format!("box {j}: analytic vs backward"), &e, exact));
        }
    }
    Ok(rows)
}

fn system(p: &ScsmParams) -> Result<SystemParams> {
    SystemParams::new(p.m, p.gamma, p.t, default_step(p.step, p.t))
}

pub fn scsm_laplace(p: &ScsmParams, b: Budget) -> Result<Vec<Row>> {
    let r = laplace_check(&p.z0, &system(p)?, &p.intervals, b.mc()?)?;
    Ok(vec![Row::pair("laplace: particles vs dual", &r)])
}

pub fn moments(p: &ScsmParams, b: Budget) -> Result<Vec<Row>> {
    let r = moment_check(&p.z0, &system(p)?, &p.intervals, b.mc()?)?;
    let mut rows = vec![
        Row::pair("first moment", &r.first),
        Row::pair("second moment, finite m", &r.second),
    ];
    if p.limit {
        rows.push(Row::pair("second moment, limit", &r.second_limit));
    }
    Ok(rows)
}

pub fn cox_avoidance(p: &ScsmParams, b: Budget) -> Result<Vec<Row>> {
    let r = cox_avoidance_check(&p.z0, &system(p)?, &p.intervals, b.mc()?)?;
    Ok(vec![Row::pair("avoidance: particles vs dual", &r)])
}

pub fn besq_duality(p: &BesqDualityParams, b: Budget) -> Result<Vec<Row>> {
    let e = BesqExperiment {
        z0: &p.z0,
        delta0: &p.delta0,
        m: p.m,
        t: p.t,
        step: default_step(p.step, p.t),
        alpha: &p.alpha,
        beta: &p.beta,
    };
    let r = besq_duality_check(&e, b.mc()?)?;
    let mut rows = vec![Row::z("direct vs finite-m dual", &r.direct, &r.finite_dual, Z_MAX)];
    if p.limit {
        rows.push(Row::z("direct vs limit", &r.direct, &r.limit, Z_MAX));
    }
    Ok(rows)
}

pub fn evaluate_formula(f: &Formula, q: &QuadratureSpec) -> Result<Quad> {
    match *f {
        Formula::ProbIntervalEmpty { ref z0, a, b, t, gamma } => cf::prob_interval_empty(z0, a, b, t, gamma, q),
        Formula::ExpectedSupportCount { ref z0, a, b, t, gamma } => cf::expected_support_count(z0, a, b, t, gamma, q),
        Formula::PointMassLaplaceInterval { ref z0, a, b, t, gamma, lambda } => {
            cf::point_mass_laplace_interval(z0, a, b, t, gamma, lambda, q)
        }
        Formula::LastParticleRange { ref z0, a, b, t, gamma, lambda, variant } => {
            cf::last_particle_range(z0, a, b, t, gamma, lambda, variant, q)
        }
        Formula::TauCdf { ref z0, t, gamma, variant } => cf::tau_cdf(z0, t, gamma, variant, q),
        Formula::TExtinctionCdf { zbar, gamma, t } => cf::t_extinction_cdf(zbar, gamma, t).map(Quad::exact),
        Formula::FLocationCdf { ref z0, gamma, z } => cf::f_location_cdf(z0, gamma, z, q),
        Formula::OccupationZero { ref z0, a, b, t, gamma } => cf::occupation_zero(z0, a, b, t, gamma, q),
    }
}

fn indicator(b: bool) -> f64 {
    f64::from(u8::from(b))
}

/// Particle-system estimate of the quantity a formula computes.
fn formula_oracle(f: &Formula, o: &OracleSpec, b: Budget) -> Result<McEstimate> {
    let label = f.name();
    let n = b.replicates;
    let sys = |t: f64, gamma: f64| SystemParams::new(o.m, gamma, t, default_step(o.step, t));
    let est = |g: &(dyn Fn(&mut RngStream) -> Result<f64> + Sync)| -> Result<McEstimate> {
        let v = collect(replicate_map(b.seed, label, n, g))?;
        Ok(McEstimate::from_samples(&v, b.seed, label))
    };
    match *f {
        Formula::ProbIntervalEmpty { ref z0, a, b: hi, t, gamma } => {
            let s = sys(t, gamma)?;
            est(&|rng| Ok(indicator(simulate_zm(z0, &s, rng)?.mass(a, hi) == 0.0)))
        }
        Formula::ExpectedSupportCount { ref z0, a, b: hi, t, gamma } => {
            let s = sys(t, gamma)?;
            est(&|rng| Ok(simulate_zm(z0, &s, rng)?.support_count(a, hi) as f64))
        }
        Formula::PointMassLaplaceInterval { ref z0, a, b: hi, t, gamma, lambda } => {
            let s = sys(t, gamma)?;
            est(&|rng| {
                let w = simulate_zm(z0, &s, rng)?.mass(a, hi);
                Ok(if w > 0.0 && lambda.is_finite() { (-lambda * w).exp() } else { 0.0 })
            })
        }
        Formula::LastParticleRange { ref z0, a, b: hi, t, gamma, lambda, .. } => {
            let s = sys(t, gamma)?;
            est(&|rng| {
                let z = simulate_zm(z0, &s, rng)?;
                let inside = !z.is_zero() && z.support().all(|x| a < x && x < hi);
                let w = z.mass(f64::NEG_INFINITY, f64::INFINITY);
                Ok(if inside && lambda.is_finite() { (-lambda * w).exp() } else { 0.0 })
            })
        }
        // The support count never increases, so `tau <= t` iff at most one atom at `t`.
        Formula::TauCdf { ref z0, t, gamma, .. } => {
            let s = sys(t, gamma)?;
            est(&|rng| Ok(indicator(simulate_zm(z0, &s, rng)?.atoms().len() <= 1)))
        }
        Formula::TExtinctionCdf { zbar, gamma, t } => {
            let fp = FellerParams::new(gamma)?;
            est(&|rng| Ok(indicator(feller_transition(zbar, t, fp, rng)? == 0.0)))
        }
        Formula::FLocationCdf { .. } => Err(config_err("params.oracle", "no particle oracle for f_location_cdf")),
        // Midpoint rule over `epochs` observation times.
        Formula::OccupationZero { ref z0, a, b: hi, t, gamma } => {
            let dt = t / o.epochs as f64;
            let step = default_step(o.step, t);
            est(&|rng| {
                let mut sys = ParticleSystem::feller(z0, o.m, gamma, rng)?;
                let mut hits = 0usize;
                for k in 0..o.epochs {
                    sys.advance(if k == 0 { 0.5 * dt } else { dt }, step, rng)?;
                    hits += usize::from(sys.measure().mass(a, hi) == 0.0);
                }
                Ok(t * hits as f64 / o.epochs as f64)
            })
        }
    }
}

pub fn closed_form(p: &ClosedFormParams, b: Budget) -> Result<Vec<Row>> {
    let v = evaluate_formula(&p.formula, &p.quadrature)?;
    let name = p.formula.name();
    let mut rows = Vec::new();
    if let Some(e) = p.expected {
        rows.push(Row::close(format!("{name} vs expected"), v.value, v.error, e, p.tolerance));
    }
    if let Some(o) = &p.oracle {
        let mc = formula_oracle(&p.formula, o, b)?;
        let q = McEstimate { mean: v.value, std_error: v.error, ..McEstimate::constant(v.value) };
        rows.push(Row::z(format!("{name} vs particle system (m={})", o.m), &q, &mc, Z_MAX));
    }
    if rows.is_empty() {
        rows.push(Row::value(name, v.value, v.error));
    }
    Ok(rows)
}

pub fn path_statistics(p: &PathParams, b: Budget) -> Result<Vec<Row>> {
    let grid = p.grid.build(&[p.t])?;
    let step = default_step(p.step, 1.0);
    let stats = collect(replicate_map(b.seed, "path-stats", b.replicates, |rng| {
        path_stats(&p.z0, p.m, p.gamma, &grid, step, rng)
    }))?;
    let freq = |f: &dyn Fn(&crate::scsm::PathStats) -> bool, label: &str| {
        let v: Vec<f64> = stats.iter().map(|s| indicator(f(s))).collect();
        McEstimate::from_samples(&v, b.seed, label)
    };
    let zbar = p.z0.total_mass();
    let t_ref = cf::t_extinction_cdf(zbar, p.gamma, p.t)?;
    let tau_ref = cf::tau_cdf(&p.z0, p.t, p.gamma, FormulaVariant::Corrected, &p.quadrature)?;
    let mut rows = vec![
        Row::z_const(format!("P{{T <= {}}}", p.t), &freq(&|s| s.t_hat.is_some_and(|x| x <= p.t), "T"), t_ref),
        Row::z(
            format!("P{{tau <= {}}}", p.t),
            &freq(&|s| s.tau_hat.is_some_and(|x| x <= p.t), "tau"),
            &McEstimate { std_error: tau_ref.error, ..McEstimate::constant(tau_ref.value) },
            Z_MAX,
        ),
    ];
    if p.ks && zbar > 0.0 {
        let f: Vec<f64> = stats.iter().filter_map(|s| s.f_exact).collect();
        let censored = 1.0 - f.len() as f64 / stats.len() as f64;
        let q = p.quadrature;
        let ks = ks_test(&f, |z| cf::f_location_cdf(&p.z0, p.gamma, z, &q).map_or(f64::NAN, |v| v.value))?;
        rows.push(Row::ks("KS: F vs f_location_cdf", &ks, f.len() as f64));
        rows.push(Row::bound("censored fraction", censored, 1e-3));
    }
    Ok(rows)
}

pub fn flow_compare(p: &FlowParams, b: Budget, out: Option<&Path>) -> Result<Vec<Row>> {
    let step = default_step(p.step, p.t);
    let probe = flow_grid(p.level, p.lo, p.hi, p.t, step, &mut RngStream::for_replicate(b.seed, "flow-grid-csv", 0))?;
    if !flow_covers(&probe, &p.z0) {
        return Err(config_err("params.lo", "grid cells do not cover the support of z0"));
    }
    if let (true, Some(dir)) = (p.grid_csv, out) {
        let mut s = String::from("grid_point,image,block\n");
        for (x, y, k) in probe.rows() {
            writeln!(s, "{x},{y},{k}").expect("write to string");
        }
        fs::create_dir_all(dir)?;
        fs::write(dir.join("flow_grid.csv"), s)?;
    }
    let flow = collect(replicate_map(b.seed, "flow-side", b.replicates, |rng| {
        let g = flow_grid(p.level, p.lo, p.hi, p.t, step, rng)?;
        Ok((-flow_construct_zt(&p.z0, p.gamma, &g, rng)?.weighted_mass(&p.intervals)).exp())
    }))?;
    let sys = SystemParams::new(p.m, p.gamma, p.t, step)?;
    let zm = collect(replicate_map(b.seed, "particle-side", b.replicates, |rng| {
        Ok((-simulate_zm(&p.z0, &sys, rng)?.weighted_mass(&p.intervals)).exp())
    }))?;
    let a = McEstimate::from_samples(&flow, b.seed, "flow-side");
    let c = McEstimate::from_samples(&zm, b.seed, "particle-side");
    Ok(vec![Row::z(format!("laplace: flow (level {}) vs particles (m={})", p.level, p.m), &a, &c, Z_MAX)])
}

/// Monte Carlo mean of the dual pair functional, used by the acceptance suite.
pub(crate) fn pair_dual_mean(z0: &InitialMeasure, a: f64, b: f64, t: f64, gamma: f64, budget: Budget) -> Result<McEstimate> {
    let k = 2.0 / (gamma * t);
    let v = collect(replicate_map(budget.seed, "pair-dual", budget.replicates, |rng| {
        let s = crate::contcoal::coalescing_pair_exact(a, b, t, rng)?;
        Ok((-k * z0.mass(s.y1, s.y2)).exp())
    }))?;
    Ok(McEstimate::from_samples(&v, budget.seed, "pair-dual"))
}
