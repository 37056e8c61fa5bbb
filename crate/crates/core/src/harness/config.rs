use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::closedform::{FormulaVariant, QuadratureSpec};
use crate::error::{Error, Result};
use crate::scsm::{DimensionSpec, InitialMeasure, IntervalUnion};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ExperimentKind {
    Sample,
    DualityLattice,
    DualityBm,
    ScsmLaplace,
    Moments,
    ClosedForm,
    PathStats,
    FlowCompare,
    CoxAvoidance,
    BesqDuality,
}

impl ExperimentKind {
    pub const ALL: [ExperimentKind; 10] = [
        Self::Sample,
        Self::DualityLattice,
        Self::DualityBm,
        Self::ScsmLaplace,
        Self::Moments,
        Self::ClosedForm,
        Self::PathStats,
        Self::FlowCompare,
        Self::CoxAvoidance,
        Self::BesqDuality,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Self::Sample => "sample",
            Self::DualityLattice => "duality-lattice",
            Self::DualityBm => "duality-bm",
            Self::ScsmLaplace => "scsm-laplace",
            Self::Moments => "moments",
            Self::ClosedForm => "closed-form",
            Self::PathStats => "path-stats",
            Self::FlowCompare => "flow-compare",
            Self::CoxAvoidance => "cox-avoidance",
            Self::BesqDuality => "besq-duality",
        }
    }
}

impl fmt::Display for ExperimentKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ExperimentKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| config_err("kind", format!("unknown experiment kind `{s}`")))
    }
}

pub(crate) fn config_err(path: &str, message: impl Into<String>) -> Error {
    Error::Config { path: path.to_string(), message: message.into() }
}

fn positive(path: &str, v: f64) -> Result<()> {
    if v.is_finite() && v > 0.0 {
        Ok(())
    } else {
        Err(config_err(path, format!("must be finite and > 0, got {v}")))
    }
}

fn nonneg(path: &str, v: f64) -> Result<()> {
    if v.is_finite() && v >= 0.0 {
        Ok(())
    } else {
        Err(config_err(path, format!("must be finite and >= 0, got {v}")))
    }
}

fn unit(path: &str, v: f64) -> Result<()> {
    if (0.0..=1.0).contains(&v) {
        Ok(())
    } else {
        Err(config_err(path, format!("must lie in [0, 1], got {v}")))
    }
}

fn at_least(path: &str, v: usize, min: usize) -> Result<()> {
    if v >= min {
        Ok(())
    } else {
        Err(config_err(path, format!("must be >= {min}, got {v}")))
    }
}

fn sorted(path: &str, v: &[f64]) -> Result<()> {
    if v.iter().any(|x| !x.is_finite()) || v.windows(2).any(|w| w[0] > w[1]) {
        return Err(config_err(path, "must be finite and nondecreasing"));
    }
    Ok(())
}

fn step_or_default(path: &str, step: Option<f64>, t: f64) -> Result<f64> {
    match step {
        Some(s) => positive(path, s).map(|_| s),
        None => Ok(1e-3 * t),
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MassProcess {
    Feller,
    Besq,
}

/// Direct check of the Feller or squared Bessel transition sampler.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SampleParams {
    #[serde(default = "feller")]
    pub process: MassProcess,
    pub x: f64,
    pub t: f64,
    #[serde(default)]
    pub gamma: Option<f64>,
    #[serde(default)]
    pub delta: Option<f64>,
    #[serde(default)]
    pub lambdas: Vec<f64>,
}

fn feller() -> MassProcess {
    MassProcess::Feller
}

/// Exhaustive check of the generator identity over small lattice windows.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GeneratorSweep {
    #[serde(default = "three")]
    pub max_m: usize,
    #[serde(default = "three")]
    pub max_n: usize,
    /// Positions range over the lattice points of `[-window, window]`.
    #[serde(default = "window")]
    pub window: f64,
    #[serde(default = "sweep_p")]
    pub p: Vec<f64>,
    #[serde(default = "fifty")]
    pub functions: usize,
    #[serde(default = "tiny")]
    pub tolerance: f64,
}

fn three() -> usize {
    3
}
fn window() -> f64 {
    3.0
}
fn sweep_p() -> Vec<f64> {
    vec![0.3, 0.5, 0.9]
}
fn fifty() -> usize {
    50
}
fn tiny() -> f64 {
    1e-12
}

impl Default for GeneratorSweep {
    fn default() -> Self {
        Self { max_m: 3, max_n: 3, window: 3.0, p: sweep_p(), functions: 50, tolerance: 1e-12 }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LatticeParams {
    /// Forward walkers, on the integers.
    pub x: Vec<f64>,
    /// Box ends, on the half-integers.
    pub y: Vec<f64>,
    pub p: f64,
    pub t: f64,
    #[serde(default = "forty")]
    pub truncation_radius: usize,
    #[serde(default = "forty")]
    pub jump_cap: usize,
    #[serde(default = "oracle_tol")]
    pub oracle_tolerance: f64,
    #[serde(default = "cell_tol")]
    pub cell_tolerance: f64,
    #[serde(default)]
    pub generator: Option<GeneratorSweep>,
}

fn forty() -> usize {
    40
}
fn oracle_tol() -> f64 {
    1e-6
}
fn cell_tol() -> f64 {
    0.003
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BmParams {
    pub x: Vec<f64>,
    pub y: Vec<f64>,
    pub t: f64,
    #[serde(default)]
    pub step: Option<f64>,
}

/// Shared by `scsm-laplace`, `moments` and `cox-avoidance`.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScsmParams {
    pub z0: InitialMeasure,
    pub m: usize,
    pub gamma: f64,
    pub t: f64,
    #[serde(default)]
    pub step: Option<f64>,
    pub intervals: IntervalUnion,
    /// `moments` only: also compare with the infinite-m second moment.
    #[serde(default = "yes")]
    pub limit: bool,
}

fn yes() -> bool {
    true
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(tag = "name", rename_all = "snake_case", deny_unknown_fields)]
pub enum Formula {
    ProbIntervalEmpty { z0: InitialMeasure, a: f64, b: f64, t: f64, gamma: f64 },
    ExpectedSupportCount { z0: InitialMeasure, a: f64, b: f64, t: f64, gamma: f64 },
    PointMassLaplaceInterval { z0: InitialMeasure, a: f64, b: f64, t: f64, gamma: f64, lambda: f64 },
    LastParticleRange {
        z0: InitialMeasure,
        a: f64,
        b: f64,
        t: f64,
        gamma: f64,
        lambda: f64,
        #[serde(default)]
        variant: FormulaVariant,
    },
    TauCdf {
        z0: InitialMeasure,
        t: f64,
        gamma: f64,
        #[serde(default)]
        variant: FormulaVariant,
    },
    TExtinctionCdf { zbar: f64, gamma: f64, t: f64 },
    FLocationCdf { z0: InitialMeasure, gamma: f64, z: f64 },
    OccupationZero { z0: InitialMeasure, a: f64, b: f64, t: f64, gamma: f64 },
}

impl Formula {
    pub fn name(&self) -> &'static str {
        match self {
            Formula::ProbIntervalEmpty { .. } => "prob_interval_empty",
            Formula::ExpectedSupportCount { .. } => "expected_support_count",
            Formula::PointMassLaplaceInterval { .. } => "point_mass_laplace_interval",
            Formula::LastParticleRange { .. } => "last_particle_range",
            Formula::TauCdf { .. } => "tau_cdf",
            Formula::TExtinctionCdf { .. } => "t_extinction_cdf",
            Formula::FLocationCdf { .. } => "f_location_cdf",
            Formula::OccupationZero { .. } => "occupation_zero",
        }
    }

    fn validate(&self) -> Result<()> {
        let p = "params.formula";
        let check_ab = |a: f64, b: f64| {
            if a.is_finite() && b.is_finite() && a < b {
                Ok(())
            } else {
                Err(config_err(&format!("{p}.b"), format!("need finite a < b, got a = {a}, b = {b}")))
            }
        };
        match *self {
            Formula::ProbIntervalEmpty { a, b, t, gamma, .. }
            | Formula::ExpectedSupportCount { a, b, t, gamma, .. }
            | Formula::OccupationZero { a, b, t, gamma, .. } => {
                check_ab(a, b)?;
                positive(&format!("{p}.t"), t)?;
                positive(&format!("{p}.gamma"), gamma)
            }
            Formula::PointMassLaplaceInterval { a, b, t, gamma, lambda, .. }
            | Formula::LastParticleRange { a, b, t, gamma, lambda, .. } => {
                check_ab(a, b)?;
                positive(&format!("{p}.t"), t)?;
                positive(&format!("{p}.gamma"), gamma)?;
                if lambda.is_nan() || lambda < 0.0 {
                    return Err(config_err(&format!("{p}.lambda"), "must be >= 0"));
                }
                Ok(())
            }
            Formula::TauCdf { t, gamma, .. } => {
                positive(&format!("{p}.t"), t)?;
                positive(&format!("{p}.gamma"), gamma)
            }
            Formula::TExtinctionCdf { zbar, gamma, t } => {
                nonneg(&format!("{p}.zbar"), zbar)?;
                positive(&format!("{p}.gamma"), gamma)?;
                positive(&format!("{p}.t"), t)
            }
            Formula::FLocationCdf { ref z0, gamma, z } => {
                positive(&format!("{p}.gamma"), gamma)?;
                if z.is_nan() {
                    return Err(config_err(&format!("{p}.z"), "must not be NaN"));
                }
                if z0.total_mass() == 0.0 {
                    return Err(config_err(&format!("{p}.z0"), "needs positive total mass"));
                }
                Ok(())
            }
        }
    }
}

/// Particle-system Monte Carlo run alongside a closed-form value.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OracleSpec {
    #[serde(default = "two_hundred")]
    pub m: usize,
    #[serde(default)]
    pub step: Option<f64>,
    /// Observation epochs for time-dependent functionals.
    #[serde(default = "two_hundred")]
    pub epochs: usize,
}

fn two_hundred() -> usize {
    200
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ClosedFormParams {
    pub formula: Formula,
    #[serde(default)]
    pub quadrature: QuadratureSpec,
    #[serde(default)]
    pub expected: Option<f64>,
    #[serde(default = "value_tol")]
    pub tolerance: f64,
    #[serde(default)]
    pub oracle: Option<OracleSpec>,
}

fn value_tol() -> f64 {
    1e-6
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(rename_all = "lowercase", deny_unknown_fields)]
pub enum GridSpec {
    Points(Vec<f64>),
    Geometric { start: f64, end: f64, ratio: f64 },
}

impl GridSpec {
    /// Grid points, with each of `extra` inserted.
    pub fn build(&self, extra: &[f64]) -> Result<Vec<f64>> {
        let mut g = match *self {
            GridSpec::Points(ref v) => v.clone(),
            GridSpec::Geometric { start, end, ratio } => {
                positive("params.grid.geometric.start", start)?;
                if !(ratio > 1.0 && ratio.is_finite()) {
                    return Err(config_err("params.grid.geometric.ratio", "must be > 1"));
                }
                if !(end > start && end.is_finite()) {
                    return Err(config_err("params.grid.geometric.end", "must exceed start"));
                }
                let n = ((end / start).ln() / ratio.ln()).ceil() as usize;
                (0..=n).map(|k| (start * ratio.powi(k as i32)).min(end)).collect()
            }
        };
        g.extend_from_slice(extra);
        g.sort_by(f64::total_cmp);
        g.dedup();
        if g.is_empty() || g[0] <= 0.0 || g.iter().any(|x| !x.is_finite()) {
            return Err(config_err("params.grid", "points must be finite and positive"));
        }
        Ok(g)
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PathParams {
    pub z0: InitialMeasure,
    pub m: usize,
    pub gamma: f64,
    #[serde(default)]
    pub step: Option<f64>,
    pub grid: GridSpec,
    /// Evaluation time for the `T` and `tau` laws; inserted into the grid.
    pub t: f64,
    #[serde(default = "yes")]
    pub ks: bool,
    #[serde(default)]
    pub quadrature: QuadratureSpec,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FlowParams {
    pub z0: InitialMeasure,
    pub gamma: f64,
    pub t: f64,
    pub level: u32,
    pub lo: f64,
    pub hi: f64,
    #[serde(default)]
    pub step: Option<f64>,
    pub m: usize,
    pub intervals: IntervalUnion,
    /// Write one flow realization to `flow_grid.csv`.
    #[serde(default)]
    pub grid_csv: bool,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BesqDualityParams {
    pub z0: InitialMeasure,
    pub delta0: DimensionSpec,
    pub m: usize,
    pub t: f64,
    #[serde(default)]
    pub step: Option<f64>,
    pub alpha: IntervalUnion,
    pub beta: Vec<f64>,
    #[serde(default = "yes")]
    pub limit: bool,
}

#[derive(Clone, Debug, Serialize)]
#[serde(untagged)]
pub enum Params {
    Sample(SampleParams),
    DualityLattice(LatticeParams),
    DualityBm(BmParams),
    Scsm(ScsmParams),
    ClosedForm(ClosedFormParams),
    PathStats(PathParams),
    FlowCompare(FlowParams),
    BesqDuality(BesqDualityParams),
}

fn parse<T: DeserializeOwned>(v: &Value) -> Result<T> {
    serde_path_to_error::deserialize(v).map_err(|e| {
        let inner = e.path().to_string();
        let path = if inner == "." { "params".to_string() } else { format!("params.{inner}") };
        config_err(&path, e.into_inner().to_string())
    })
}

impl Params {
    pub fn parse(kind: ExperimentKind, v: &Value) -> Result<Self> {
        let p = match kind {
            ExperimentKind::Sample => Params::Sample(parse(v)?),
            ExperimentKind::DualityLattice => Params::DualityLattice(parse(v)?),
            ExperimentKind::DualityBm => Params::DualityBm(parse(v)?),
            ExperimentKind::ScsmLaplace | ExperimentKind::Moments | ExperimentKind::CoxAvoidance => {
                Params::Scsm(parse(v)?)
            }
            ExperimentKind::ClosedForm => Params::ClosedForm(parse(v)?),
            ExperimentKind::PathStats => Params::PathStats(parse(v)?),
            ExperimentKind::FlowCompare => Params::FlowCompare(parse(v)?),
            ExperimentKind::BesqDuality => Params::BesqDuality(parse(v)?),
        };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            Params::Sample(s) => {
                nonneg("params.x", s.x)?;
                positive("params.t", s.t)?;
                match s.process {
                    MassProcess::Feller => {
                        let g = s.gamma.ok_or_else(|| config_err("params.gamma", "required for feller"))?;
                        positive("params.gamma", g)?;
                    }
                    MassProcess::Besq => {
                        let d = s.delta.ok_or_else(|| config_err("params.delta", "required for besq"))?;
                        nonneg("params.delta", d)?;
                    }
                }
                for (i, &l) in s.lambdas.iter().enumerate() {
                    nonneg(&format!("params.lambdas[{i}]"), l)?;
                }
            }
            Params::DualityLattice(l) => {
                at_least("params.x", l.x.len(), 1)?;
                at_least("params.y", l.y.len(), 2)?;
                sorted("params.x", &l.x)?;
                sorted("params.y", &l.y)?;
                unit("params.p", l.p)?;
                positive("params.t", l.t)?;
                positive("params.oracle_tolerance", l.oracle_tolerance)?;
                positive("params.cell_tolerance", l.cell_tolerance)?;
                if let Some(g) = &l.generator {
                    at_least("params.generator.max_m", g.max_m, 1)?;
                    at_least("params.generator.max_n", g.max_n, 1)?;
                    positive("params.generator.window", g.window)?;
                    at_least("params.generator.functions", g.functions, 1)?;
                    for (i, &p) in g.p.iter().enumerate() {
                        unit(&format!("params.generator.p[{i}]"), p)?;
                    }
                }
            }
            Params::DualityBm(b) => {
                at_least("params.x", b.x.len(), 1)?;
                at_least("params.y", b.y.len(), 2)?;
                sorted("params.x", &b.x)?;
                sorted("params.y", &b.y)?;
                positive("params.t", b.t)?;
                step_or_default("params.step", b.step, b.t)?;
            }
            Params::Scsm(s) => {
                at_least("params.m", s.m, 1)?;
                positive("params.gamma", s.gamma)?;
                positive("params.t", s.t)?;
                step_or_default("params.step", s.step, s.t)?;
            }
            Params::ClosedForm(c) => {
                c.formula.validate()?;
                c.quadrature.validate().map_err(|e| config_err("params.quadrature", e.to_string()))?;
                positive("params.tolerance", c.tolerance)?;
                if let Some(o) = &c.oracle {
                    at_least("params.oracle.m", o.m, 1)?;
                    at_least("params.oracle.epochs", o.epochs, 1)?;
                    if let Some(s) = o.step {
                        positive("params.oracle.step", s)?;
                    }
                    if matches!(c.formula, Formula::FLocationCdf { .. }) {
                        return Err(config_err(
                            "params.oracle",
                            "no particle oracle for f_location_cdf; use the path-stats experiment",
                        ));
                    }
                }
            }
            Params::PathStats(p) => {
                at_least("params.m", p.m, 1)?;
                positive("params.gamma", p.gamma)?;
                positive("params.t", p.t)?;
                p.grid.build(&[p.t])?;
                step_or_default("params.step", p.step, 1.0)?;
                p.quadrature.validate().map_err(|e| config_err("params.quadrature", e.to_string()))?;
            }
            Params::FlowCompare(f) => {
                positive("params.gamma", f.gamma)?;
                positive("params.t", f.t)?;
                at_least("params.m", f.m, 1)?;
                if f.level > 20 {
                    return Err(config_err("params.level", format!("must be <= 20, got {}", f.level)));
                }
                if !(f.lo.is_finite() && f.hi.is_finite() && f.lo < f.hi) {
                    return Err(config_err("params.hi", "need finite lo < hi"));
                }
                step_or_default("params.step", f.step, f.t)?;
            }
            Params::BesqDuality(b) => {
                at_least("params.m", b.m, 1)?;
                positive("params.t", b.t)?;
                step_or_default("params.step", b.step, b.t)?;
                if b.beta.len() != b.alpha.len() {
                    return Err(config_err(
                        "params.beta",
                        format!("needs one entry per interval of alpha ({})", b.alpha.len()),
                    ));
                }
                for (i, &x) in b.beta.iter().enumerate() {
                    nonneg(&format!("params.beta[{i}]"), x)?;
                }
            }
        }
        Ok(())
    }
}

pub(crate) fn default_step(step: Option<f64>, t: f64) -> f64 {
    step.unwrap_or(1e-3 * t)
}

/// One experiment run: kind, validated parameters, seed and replicate count.
#[derive(Clone, Debug, Serialize)]
pub struct ExperimentConfig {
    pub kind: ExperimentKind,
    /// Label used in the `experiment` column; defaults to the kind.
    pub name: String,
    pub params: Params,
    pub seed: u64,
    pub replicates: u64,
    pub out: Option<PathBuf>,
    /// Record wall-clock seconds per comparison. Turn off for byte-reproducible CSV.
    pub timing: bool,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    #[serde(default)]
    kind: Option<String>,
    #[serde(default)]
    name: Option<String>,
    #[serde(default)]
    seed: Option<u64>,
    #[serde(default)]
    replicates: Option<u64>,
    #[serde(default)]
    out: Option<PathBuf>,
    #[serde(default)]
    timing: Option<bool>,
    params: Value,
}

pub const DEFAULT_SEED: u64 = 1;
pub const DEFAULT_REPLICATES: u64 = 10_000;

impl ExperimentConfig {
    pub fn new(kind: ExperimentKind, params: Params, seed: u64, replicates: u64) -> Result<Self> {
        params.validate()?;
        if replicates < 2 {
            return Err(config_err("replicates", format!("must be >= 2, got {replicates}")));
        }
        Ok(Self { kind, name: kind.name().to_string(), params, seed, replicates, out: None, timing: true })
    }

    /// Parses a config document. `kind` comes from the CLI subcommand; if the document
    /// also names a kind, the two must agree.
    pub fn from_json(kind: Option<ExperimentKind>, text: &str) -> Result<Self> {
        let raw: RawConfig = serde_path_to_error::deserialize(&mut serde_json::Deserializer::from_str(text))
            .map_err(|e| {
                let path = e.path().to_string();
                config_err(if path == "." { "config" } else { &path }, e.into_inner().to_string())
            })?;
        let doc_kind = raw.kind.as_deref().map(str::parse).transpose()?;
        let kind = match (kind, doc_kind) {
            (Some(a), Some(b)) if a != b => {
                return Err(config_err("kind", format!("config is for `{b}`, not `{a}`")));
            }
            (Some(k), _) | (None, Some(k)) => k,
            (None, None) => return Err(config_err("kind", "missing experiment kind")),
        };
        let params = Params::parse(kind, &raw.params)?;
        let mut cfg = Self::new(
            kind,
            params,
            raw.seed.unwrap_or(DEFAULT_SEED),
            raw.replicates.unwrap_or(DEFAULT_REPLICATES),
        )?;
        if let Some(n) = raw.name {
            cfg.name = n;
        }
        cfg.out = raw.out;
        cfg.timing = raw.timing.unwrap_or(true);
        Ok(cfg)
    }
}
