//! Experiment configuration, dispatch, statistical comparison rows and report
//! files, plus the acceptance suite.

pub mod acceptance;
mod config;
mod experiments;
mod report;

use std::time::Instant;

pub use config::{
    BesqDualityParams, BmParams, ClosedFormParams, ExperimentConfig, ExperimentKind, FlowParams, Formula,
    GeneratorSweep, GridSpec, LatticeParams, MassProcess, OracleSpec, Params, PathParams, SampleParams,
    ScsmParams, DEFAULT_REPLICATES, DEFAULT_SEED,
};
pub use experiments::{evaluate_formula, generator_sweep, Budget};
pub use report::{csv_string, summary_json, write_outputs, z_score, Row, TestReport, ALPHA, Z_MAX};

use crate::error::{Error, Result};

/// Runs the experiment without writing `results.csv` or `summary.json`.
pub fn execute(cfg: &ExperimentConfig) -> Result<TestReport> {
    let b = Budget { seed: cfg.seed, replicates: cfg.replicates };
    let start = Instant::now();
    let rows = match (&cfg.params, cfg.kind) {
        (Params::Sample(p), _) => experiments::sample(p, b),
        (Params::DualityLattice(p), _) => experiments::duality_lattice(p, b),
        (Params::DualityBm(p), _) => experiments::duality_bm(p, b),
        (Params::Scsm(p), ExperimentKind::Moments) => experiments::moments(p, b),
        (Params::Scsm(p), ExperimentKind::CoxAvoidance) => experiments::cox_avoidance(p, b),
        (Params::Scsm(p), _) => experiments::scsm_laplace(p, b),
        (Params::ClosedForm(p), _) => experiments::closed_form(p, b),
        (Params::PathStats(p), _) => experiments::path_statistics(p, b),
        (Params::FlowCompare(p), _) => experiments::flow_compare(p, b, cfg.out.as_deref()),
        (Params::BesqDuality(p), _) => experiments::besq_duality(p, b),
    }
    .map_err(|e| match e {
        e @ Error::Config { .. } => e,
        e => Error::Experiment { experiment: cfg.name.clone(), source: Box::new(e) },
    })?;
    let seconds = cfg.timing.then(|| start.elapsed().as_secs_f64());
    let rows = rows
        .into_iter()
        .map(|mut r| {
            r.experiment = cfg.name.clone();
            r.with_seconds(seconds)
        })
        .collect();
    Ok(TestReport {
        experiment: cfg.name.clone(),
        kind: cfg.kind.name().to_string(),
        seed: cfg.seed,
        replicates: cfg.replicates,
        rows,
        seconds,
    })
}

/// Runs the experiment and, when `cfg.out` is set, writes `results.csv` and `summary.json` there.
pub fn run(cfg: &ExperimentConfig) -> Result<TestReport> {
    let report = execute(cfg)?;
    if let Some(dir) = &cfg.out {
        write_outputs(dir, std::slice::from_ref(&report))?;
    }
    Ok(report)
}

#[cfg(test)]
mod tests;
