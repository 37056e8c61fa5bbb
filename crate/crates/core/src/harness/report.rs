use std::fs;
use std::path::Path;

use serde::Serialize;
use statrs::distribution::{ChiSquared, ContinuousCDF};

use crate::error::Result;
use crate::scsm::PairReport;
use crate::stats::{ks_critical, ChiSquareResult, KsResult, McEstimate};

/// Significance level for chi-square and KS comparisons.
pub const ALPHA: f64 = 1e-3;
/// Largest accepted `|z|`.
pub const Z_MAX: f64 = 3.0;

/// One comparison. `pass` holds iff `statistic` is within `threshold`: `|z| <= threshold`
/// for z-scores, `statistic <= threshold` for everything else.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Row {
    pub experiment: String,
    pub comparison: String,
    pub estimate_a: f64,
    pub se_a: Option<f64>,
    pub estimate_b: Option<f64>,
    pub se_b: Option<f64>,
    pub statistic: f64,
    pub threshold: f64,
    pub pass: bool,
    pub seconds: Option<f64>,
}

/// Signed z-score that tolerates two exact values: equal means give 0 and unequal
/// ones give an infinite score.
pub fn z_score(a: &McEstimate, b: &McEstimate) -> f64 {
    let se = a.std_error.hypot(b.std_error);
    let d = a.mean - b.mean;
    if se > 0.0 {
        d / se
    } else if d.abs() <= 1e-12 * (1.0 + a.mean.abs()) {
        0.0
    } else {
        d.signum() * f64::INFINITY
    }
}

impl Row {
    fn blank(comparison: impl Into<String>) -> Self {
        Row {
            experiment: String::new(),
            comparison: comparison.into(),
            estimate_a: f64::NAN,
            se_a: None,
            estimate_b: None,
            se_b: None,
            statistic: f64::NAN,
            threshold: f64::NAN,
            pass: false,
            seconds: None,
        }
    }

    pub fn z(comparison: impl Into<String>, a: &McEstimate, b: &McEstimate, threshold: f64) -> Self {
        let z = z_score(a, b);
        Row {
            estimate_a: a.mean,
            se_a: Some(a.std_error),
            estimate_b: Some(b.mean),
            se_b: Some(b.std_error),
            statistic: z,
            threshold,
            pass: z.abs() <= threshold,
            ..Self::blank(comparison)
        }
    }

    pub fn z_const(comparison: impl Into<String>, a: &McEstimate, reference: f64) -> Self {
        Self::z(comparison, a, &McEstimate::constant(reference), Z_MAX)
    }

    pub fn pair(comparison: impl Into<String>, r: &PairReport) -> Self {
        Self::z(comparison, &r.a, &r.b, Z_MAX)
    }

    pub fn chi2(comparison: impl Into<String>, r: &ChiSquareResult) -> Self {
        let threshold = if r.dof == 0 {
            f64::INFINITY
        } else {
            ChiSquared::new(r.dof as f64).expect("dof > 0").inverse_cdf(1.0 - ALPHA)
        };
        Row {
            estimate_a: r.p_value,
            statistic: r.statistic,
            threshold,
            pass: r.statistic <= threshold,
            ..Self::blank(comparison)
        }
    }

    pub fn ks(comparison: impl Into<String>, r: &KsResult, n_eff: f64) -> Self {
        let threshold = ks_critical(ALPHA, n_eff);
        Row {
            estimate_a: r.p_value,
            statistic: r.statistic,
            threshold,
            pass: r.statistic <= threshold,
            ..Self::blank(comparison)
        }
    }

    /// Exact value against a simulation with a known deterministic bias: passes
    /// within `Z_MAX` standard errors plus `allowance`.
    pub fn within(comparison: impl Into<String>, exact: f64, e: &McEstimate, allowance: f64) -> Self {
        let d = (e.mean - exact).abs();
        let threshold = Z_MAX * e.std_error + allowance;
        Row {
            estimate_a: exact,
            estimate_b: Some(e.mean),
            se_b: Some(e.std_error),
            statistic: d,
            threshold,
            pass: d <= threshold,
            ..Self::blank(comparison)
        }
    }

    /// Quantity that must not exceed `bound`.
    pub fn bound(comparison: impl Into<String>, value: f64, bound: f64) -> Self {
        Row {
            estimate_a: value,
            statistic: value,
            threshold: bound,
            pass: value <= bound,
            ..Self::blank(comparison)
        }
    }

    /// Deterministic value against a reference with an absolute tolerance.
    pub fn close(comparison: impl Into<String>, value: f64, error: f64, reference: f64, tol: f64) -> Self {
        let d = (value - reference).abs();
        Row {
            estimate_a: value,
            se_a: Some(error),
            estimate_b: Some(reference),
            statistic: d,
            threshold: tol,
            pass: d <= tol,
            ..Self::blank(comparison)
        }
    }

    /// A reported value with nothing to compare against; always passes.
    pub fn value(comparison: impl Into<String>, value: f64, error: f64) -> Self {
        Row {
            estimate_a: value,
            se_a: Some(error),
            statistic: 0.0,
            threshold: 0.0,
            pass: value.is_finite(),
            ..Self::blank(comparison)
        }
    }

    pub fn with_seconds(mut self, s: Option<f64>) -> Self {
        self.seconds = s;
        self
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct TestReport {
    pub experiment: String,
    pub kind: String,
    pub seed: u64,
    pub replicates: u64,
    pub rows: Vec<Row>,
    pub seconds: Option<f64>,
}

impl TestReport {
    pub fn pass(&self) -> bool {
        !self.rows.is_empty() && self.rows.iter().all(|r| r.pass)
    }

    pub fn failures(&self) -> impl Iterator<Item = &Row> {
        self.rows.iter().filter(|r| !r.pass)
    }
}

pub fn csv_string(rows: &[Row]) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for r in rows {
        w.serialize(r).map_err(|e| crate::Error::InvalidState(format!("csv: {e}")))?;
    }
    let bytes = w.into_inner().map_err(|e| crate::Error::InvalidState(format!("csv: {e}")))?;
    Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
}

#[derive(Serialize)]
struct Summary<'a> {
    pass: bool,
    comparisons: usize,
    failed: Vec<&'a str>,
    versions: Versions,
    experiments: Vec<ExperimentSummary<'a>>,
}

#[derive(Serialize)]
struct Versions {
    coalsim: &'static str,
    rng: &'static str,
}

#[derive(Serialize)]
struct ExperimentSummary<'a> {
    experiment: &'a str,
    kind: &'a str,
    pass: bool,
    seed: u64,
    replicates: u64,
    seconds: Option<f64>,
    failed: Vec<&'a str>,
}

pub fn summary_json(reports: &[TestReport]) -> Result<String> {
    let failed: Vec<&str> = reports.iter().flat_map(|r| r.failures().map(|f| f.comparison.as_str())).collect();
    let s = Summary {
        pass: reports.iter().all(TestReport::pass),
        comparisons: reports.iter().map(|r| r.rows.len()).sum(),
        failed,
        versions: Versions { coalsim: env!("CARGO_PKG_VERSION"), rng: "ChaCha8, stream per replicate" },
        experiments: reports
            .iter()
            .map(|r| ExperimentSummary {
                experiment: &r.experiment,
                kind: &r.kind,
                pass: r.pass(),
                seed: r.seed,
                replicates: r.replicates,
                seconds: r.seconds,
                failed: r.failures().map(|f| f.comparison.as_str()).collect(),
            })
            .collect(),
    };
    Ok(serde_json::to_string_pretty(&s)? + "\n")
}

/// Writes `results.csv` and `summary.json` into `dir`, creating it if needed.
pub fn write_outputs(dir: &Path, reports: &[TestReport]) -> Result<()> {
    fs::create_dir_all(dir)?;
    let rows: Vec<Row> = reports.iter().flat_map(|r| r.rows.iter().cloned()).collect();
    fs::write(dir.join("results.csv"), csv_string(&rows)?)?;
    fs::write(dir.join("summary.json"), summary_json(reports)?)?;
    Ok(())
}
