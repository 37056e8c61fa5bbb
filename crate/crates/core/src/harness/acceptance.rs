//! The acceptance criteria AC-1 to AC-10, with their parameters, replicate counts,
//! tolerances and runtime budgets fixed here.

use std::time::Instant;

use super::config::{
    BesqDualityParams, BmParams, ExperimentConfig, ExperimentKind, FlowParams, Formula, GeneratorSweep, GridSpec,
    LatticeParams, MassProcess, OracleSpec, Params, PathParams, SampleParams, ScsmParams,
};
use super::experiments::{self, pair_dual_mean, Budget};
use super::report::{Row, TestReport, Z_MAX};
use super::{execute, ClosedFormParams};
use crate::closedform::{prob_interval_empty, QuadratureSpec};
use crate::error::Result;
use crate::scsm::{DimensionSpec, InitialMeasure, IntervalUnion};
use crate::special::normal_cdf;
use crate::stats::McEstimate;

pub const DEFAULT_SEED: u64 = 20_240_601;

/// e^{-2}, the extinction probability of unit mass by time 1 at unit branching rate.
pub const E_MINUS_2: f64 = 0.135_335_283_236_612_7;

#[derive(Clone, Debug)]
pub struct CriterionResult {
    pub id: &'static str,
    pub title: &'static str,
    pub rows: Vec<Row>,
    pub error: Option<String>,
    pub seconds: f64,
    pub budget: f64,
}

impl CriterionResult {
    pub fn statistics_pass(&self) -> bool {
        self.error.is_none() && !self.rows.is_empty() && self.rows.iter().all(|r| r.pass)
    }

    pub fn within_budget(&self) -> bool {
        self.seconds <= self.budget
    }

    pub fn pass(&self) -> bool {
        self.statistics_pass() && self.within_budget()
    }

    /// One-line verdict for the console.
    pub fn line(&self) -> String {
        let verdict = if self.pass() { "PASS" } else { "FAIL" };
        let detail = match &self.error {
            Some(e) => format!("error: {e}"),
            None => {
                let failed: Vec<&str> = self.rows.iter().filter(|r| !r.pass).map(|r| r.comparison.as_str()).collect();
                if failed.is_empty() {
                    format!("{} comparisons ok", self.rows.len())
                } else {
                    format!("failed: {}", failed.join("; "))
                }
            }
        };
        let time = if self.within_budget() { "" } else { " OVER BUDGET" };
        format!(
            "{} {verdict} {} | {detail} | {:.1} s of {:.0} s{time}",
            self.id, self.title, self.seconds, self.budget
        )
    }

    pub fn report(&self, seed: u64) -> TestReport {
        TestReport {
            experiment: self.id.to_string(),
            kind: "acceptance".into(),
            seed,
            replicates: 0,
            rows: self.rows.clone(),
            seconds: Some(self.seconds),
        }
    }
}

struct Criterion {
    id: &'static str,
    title: &'static str,
    budget: f64,
    run: fn(u64) -> Result<Vec<Row>>,
}

const CRITERIA: [Criterion; 10] = [
    Criterion { id: "AC-1", title: "Feller sampler law", budget: 10.0, run: ac1 },
    Criterion { id: "AC-2", title: "lattice balls-in-boxes duality", budget: 60.0, run: ac2 },
    Criterion { id: "AC-3", title: "generator identity sweep", budget: 60.0, run: ac3 },
    Criterion { id: "AC-4", title: "continuum duality, m=1 n=2", budget: 10.0, run: ac4 },
    Criterion { id: "AC-5", title: "Laplace functional duality", budget: 300.0, run: ac5 },
    Criterion { id: "AC-6", title: "empty-interval probability", budget: 120.0, run: ac6 },
    Criterion { id: "AC-7", title: "expected support count", budget: 300.0, run: ac7 },
    Criterion { id: "AC-8", title: "flow construction vs particles", budget: 600.0, run: ac8 },
    Criterion { id: "AC-9", title: "BESQ duality", budget: 600.0, run: ac9 },
    Criterion { id: "AC-10", title: "laws of T and F", budget: 600.0, run: ac10 },
];

pub fn criterion_ids() -> Vec<&'static str> {
    CRITERIA.iter().map(|c| c.id).collect()
}

/// Runs the selected criteria (all when `only` is empty), calling `on_done` after each.
pub fn run_acceptance(seed: u64, only: &[String], mut on_done: impl FnMut(&CriterionResult)) -> Vec<CriterionResult> {
    CRITERIA
        .iter()
        .filter(|c| only.is_empty() || only.iter().any(|o| o.eq_ignore_ascii_case(c.id)))
        .map(|c| {
            let start = Instant::now();
            let out = (c.run)(seed);
            let seconds = start.elapsed().as_secs_f64();
            let (mut rows, error) = match out {
                Ok(r) => (r, None),
                Err(e) => (vec![], Some(e.to_string())),
            };
            for r in &mut rows {
                r.experiment = c.id.to_string();
                r.seconds = Some(seconds);
            }
            let res = CriterionResult { id: c.id, title: c.title, rows, error, seconds, budget: c.budget };
            on_done(&res);
            res
        })
        .collect()
}

fn exec(kind: ExperimentKind, params: Params, seed: u64, replicates: u64) -> Result<Vec<Row>> {
    let mut cfg = ExperimentConfig::new(kind, params, seed, replicates)?;
    cfg.timing = false;
    Ok(execute(&cfg)?.rows)
}

fn dirac(x: f64, mass: f64) -> InitialMeasure {
    InitialMeasure::dirac(x, mass).expect("valid atom")
}

fn two_atoms() -> InitialMeasure {
    InitialMeasure::atoms(&[(-0.5, 0.6), (0.5, 0.4)]).expect("valid atoms")
}

fn interval(a: f64, b: f64, w: f64) -> IntervalUnion {
    IntervalUnion::single(a, b, w).expect("valid interval")
}

fn ac1(seed: u64) -> Result<Vec<Row>> {
    let p = SampleParams { process: MassProcess::Feller, x: 1.0, t: 1.0, gamma: Some(1.0), delta: None, lambdas: vec![0.5, 1.0, 2.0] };
    let rows = exec(ExperimentKind::Sample, Params::Sample(p), seed, 1_000_000)?;
    Ok(rows.into_iter().filter(|r| r.comparison != "mean").collect())
}

fn ac2(seed: u64) -> Result<Vec<Row>> {
    let p = LatticeParams {
        x: vec![0.0, 2.0],
        y: vec![-0.5, 1.5],
        p: 0.7,
        t: 0.5,
        truncation_radius: 40,
        jump_cap: 60,
        oracle_tolerance: 1e-6,
        cell_tolerance: 0.003,
        generator: None,
    };
    exec(ExperimentKind::DualityLattice, Params::DualityLattice(p), seed, 1_000_000)
}

fn ac3(seed: u64) -> Result<Vec<Row>> {
    Ok(vec![experiments::generator_sweep(&GeneratorSweep::default(), seed)?])
}

fn ac4(seed: u64) -> Result<Vec<Row>> {
    let exact = normal_cdf(1.0) - normal_cdf(-1.0);
    let mut rows = vec![Row::close("analytic P{X(1) in ]-1, 1]}", exact, 0.0, 0.682_689, 1e-6)];
    let p = BmParams { x: vec![0.0], y: vec![-1.0, 1.0], t: 1.0, step: None };
    rows.extend(exec(ExperimentKind::DualityBm, Params::DualityBm(p), seed, 1_000_000)?);
    Ok(rows)
}

fn ac5(seed: u64) -> Result<Vec<Row>> {
    let single = ScsmParams {
        z0: dirac(0.0, 1.0),
        m: 64,
        gamma: 1.0,
        t: 1.0,
        step: Some(1e-3),
        intervals: interval(-1.0, 1.0, 1.0),
        limit: false,
    };
    let mut rows = exec(ExperimentKind::ScsmLaplace, Params::Scsm(single.clone()), seed, 100_000)?;
    rows[0].comparison.push_str(", ]-1,1] weight 1");
    let two = ScsmParams {
        intervals: IntervalUnion::new(vec![-1.0, 0.0, 0.5, 1.5], vec![1.0, 2.0])?,
        ..single
    };
    let mut more = exec(ExperimentKind::ScsmLaplace, Params::Scsm(two), seed, 100_000)?;
    more[0].comparison.push_str(", ]-1,0] weight 1 and ]0.5,1.5] weight 2");
    rows.extend(more);
    Ok(rows)
}

/// Allowance for the particle approximation at m = 200, step 1e-3: one step plus 1/(2m).
const PARTICLE_ALLOWANCE: f64 = 1e-3 + 2.5e-3;

fn ac6(seed: u64) -> Result<Vec<Row>> {
    let z0 = two_atoms();
    let q = QuadratureSpec::default();
    let v = prob_interval_empty(&z0, -1.0, 1.0, 1.0, 1.0, &q)?;
    let dual = pair_dual_mean(&z0, -1.0, 1.0, 1.0, 1.0, Budget { seed, replicates: 1_000_000 })?;
    let quad = McEstimate { std_error: v.error, ..McEstimate::constant(v.value) };
    let mut rows = vec![Row::z("quadrature vs exact dual pair", &quad, &dual, Z_MAX)];
    let cf = ClosedFormParams {
        formula: Formula::ProbIntervalEmpty { z0, a: -1.0, b: 1.0, t: 1.0, gamma: 1.0 },
        quadrature: q,
        expected: None,
        tolerance: 1e-6,
        oracle: Some(OracleSpec { m: 200, step: Some(1e-3), epochs: 1 }),
    };
    let direct = exec(ExperimentKind::ClosedForm, Params::ClosedForm(cf), seed, 100_000)?;
    let r = &direct[0];
    let e = McEstimate { std_error: r.se_b.unwrap_or(0.0), ..McEstimate::constant(r.estimate_b.unwrap_or(f64::NAN)) };
    rows.push(Row::within("quadrature vs simulate_zm (m=200)", v.value, &e, PARTICLE_ALLOWANCE));
    Ok(rows)
}

fn ac7(seed: u64) -> Result<Vec<Row>> {
    let cf = ClosedFormParams {
        formula: Formula::ExpectedSupportCount { z0: two_atoms(), a: -1.0, b: 1.0, t: 1.0, gamma: 1.0 },
        quadrature: QuadratureSpec::default(),
        expected: None,
        tolerance: 1e-6,
        oracle: Some(OracleSpec { m: 200, step: Some(1e-3), epochs: 1 }),
    };
    exec(ExperimentKind::ClosedForm, Params::ClosedForm(cf), seed, 10_000)
}

fn flow_params(level: u32, step: f64) -> FlowParams {
    FlowParams {
        z0: InitialMeasure::uniform(0.0, 1.0, 1.0).expect("valid piece"),
        gamma: 1.0,
        t: 0.5,
        level,
        lo: -0.5,
        hi: 1.5,
        step: Some(step),
        m: 200,
        intervals: interval(0.0, 1.0, 1.0),
        grid_csv: false,
    }
}

/// Passes at `|z| <= 3`. A score in `(3, 4]` is accepted only if one refinement of
/// grid level and time step shrinks the flow-minus-particle gap by a factor of at least 1.6.
fn ac8(seed: u64) -> Result<Vec<Row>> {
    let base = exec(ExperimentKind::FlowCompare, Params::FlowCompare(flow_params(6, 5e-4)), seed, 100_000)?;
    let z = base[0].statistic;
    if z.abs() <= Z_MAX || z.abs() > 4.0 {
        return Ok(base);
    }
    let fine = exec(ExperimentKind::FlowCompare, Params::FlowCompare(flow_params(7, 2.5e-4)), seed, 100_000)?;
    let gap = |r: &Row| (r.estimate_a - r.estimate_b.unwrap_or(f64::NAN)).abs();
    let ratio = gap(&base[0]) / gap(&fine[0]).max(1e-300);
    let mut rows = base;
    rows[0].threshold = 4.0;
    rows[0].pass = ratio >= 1.6;
    rows.push(Row::bound("bias shrink ratio under refinement (inverted)", 1.0 / ratio, 1.0 / 1.6));
    rows.extend(fine);
    Ok(rows)
}

fn ac9(seed: u64) -> Result<Vec<Row>> {
    let base = BesqDualityParams {
        z0: dirac(0.0, 1.0),
        delta0: DimensionSpec::new(dirac(2.0, 1.0))?,
        m: 8,
        t: 1.0,
        step: Some(1e-3),
        alpha: interval(-1.0, 1.0, 1.0),
        beta: vec![1.0],
        limit: false,
    };
    let mut rows = Vec::new();
    for m in [8, 64] {
        let p = BesqDualityParams { m, ..base.clone() };
        let mut r = exec(ExperimentKind::BesqDuality, Params::BesqDuality(p), seed, 100_000)?;
        r[0].comparison = format!("A vs B, m={m}");
        rows.extend(r);
    }
    let p = BesqDualityParams { m: 200, limit: true, ..base };
    let r = exec(ExperimentKind::BesqDuality, Params::BesqDuality(p), seed, 100_000)?;
    let mut lim = r[1].clone();
    lim.comparison = "A vs C, m=200".into();
    rows.push(lim);
    Ok(rows)
}

fn ac10(seed: u64) -> Result<Vec<Row>> {
    let p = PathParams {
        z0: dirac(0.0, 1.0),
        m: 1,
        gamma: 1.0,
        step: Some(1e-3),
        grid: GridSpec::Geometric { start: 0.01, end: 1e8, ratio: 1.005 },
        t: 1.0,
        ks: true,
        quadrature: QuadratureSpec::default(),
    };
    let rows = exec(ExperimentKind::PathStats, Params::PathStats(p), seed, 100_000)?;
    let mut out = vec![Row::close("t_extinction_cdf(1, 1, 1)", crate::closedform::t_extinction_cdf(1.0, 1.0, 1.0)?, 0.0, E_MINUS_2, 1e-15)];
    out.extend(rows);
    Ok(out)
}
