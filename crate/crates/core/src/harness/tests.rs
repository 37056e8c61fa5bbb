use super::*;

fn cfg(kind: ExperimentKind, json: &str) -> Result<ExperimentConfig> {
    ExperimentConfig::from_json(Some(kind), json)
}

fn config_path(e: Error) -> String {
    match e {
        Error::Config { path, .. } => path,
        other => panic!("expected a config error, got {other}"),
    }
}

#[test]
fn negative_gamma_names_field() {
    let e = cfg(
        ExperimentKind::ScsmLaplace,
        r#"{"params": {"z0": {"atoms": [[0, 1]]}, "m": 4, "gamma": -1, "t": 1,
            "intervals": {"ends": [-1, 1], "weights": [1]}}}"#,
    )
    .unwrap_err();
    assert_eq!(config_path(e), "params.gamma");
    let e = cfg(ExperimentKind::Sample, r#"{"params": {"x": 1, "t": 1, "gamma": -2}}"#).unwrap_err();
    assert!(e.to_string().contains("gamma"), "{e}");
}

#[test]
fn structural_errors_carry_paths() {
    let e = cfg(ExperimentKind::Sample, r#"{"params": {"x": 1, "t": 1, "gamma": 1, "bogus": 2}}"#).unwrap_err();
    assert_eq!(config_path(e), "params.bogus");
    let e = cfg(
        ExperimentKind::ScsmLaplace,
        r#"{"params": {"z0": {"atoms": [[0, -1]]}, "m": 4, "gamma": 1, "t": 1,
            "intervals": {"ends": [-1, 1], "weights": [1]}}}"#,
    )
    .unwrap_err();
    assert_eq!(config_path(e), "params.z0");
    let e = cfg(ExperimentKind::Sample, r#"{"seed": "x", "params": {}}"#).unwrap_err();
    assert_eq!(config_path(e), "seed");
    let e = cfg(ExperimentKind::Sample, r#"{"kind": "moments", "params": {}}"#).unwrap_err();
    assert_eq!(config_path(e), "kind");
    let e = ExperimentConfig::from_json(None, r#"{"params": {}}"#).unwrap_err();
    assert_eq!(config_path(e), "kind");
    let e = cfg(ExperimentKind::Sample, r#"{"replicates": 1, "params": {"x": 1, "t": 1, "gamma": 1}}"#).unwrap_err();
    assert_eq!(config_path(e), "replicates");
}

#[test]
fn closed_form_extinction_value() {
    let c = cfg(
        ExperimentKind::ClosedForm,
        r#"{"params": {"formula": {"name": "t_extinction_cdf", "zbar": 1, "gamma": 1, "t": 1},
            "expected": 0.135335, "tolerance": 1e-6}}"#,
    )
    .unwrap();
    let r = run(&c).unwrap();
    assert!(r.pass());
    assert!((r.rows[0].estimate_a - 0.135_335_283_236_612_7).abs() < 1e-15);
    let c = cfg(
        ExperimentKind::ClosedForm,
        r#"{"params": {"formula": {"name": "t_extinction_cdf", "zbar": 1, "gamma": 1, "t": 1}, "expected": 0.2}}"#,
    )
    .unwrap();
    assert!(!run(&c).unwrap().pass());
}

#[test]
fn closed_form_with_oracle() {
    let c = cfg(
        ExperimentKind::ClosedForm,
        r#"{"replicates": 20000, "seed": 3, "params": {"formula": {"name": "tau_cdf",
            "z0": {"atoms": [[-0.5, 0.5], [0.5, 0.5]]}, "t": 1, "gamma": 1},
            "oracle": {"m": 32, "step": 0.002}}}"#,
    )
    .unwrap();
    let r = run(&c).unwrap();
    assert!(r.pass(), "{:?}", r.rows);
    let c = cfg(
        ExperimentKind::ClosedForm,
        r#"{"params": {"formula": {"name": "f_location_cdf", "z0": {"atoms": [[0, 1]]}, "gamma": 1, "z": 0},
            "oracle": {}}}"#,
    );
    assert_eq!(config_path(c.unwrap_err()), "params.oracle");
}

#[test]
fn lattice_duality_passes() {
    let c = cfg(
        ExperimentKind::DualityLattice,
        r#"{"replicates": 100000, "params": {"x": [0, 2], "y": [-0.5, 1.5], "p": 0.7, "t": 0.5,
            "cell_tolerance": 0.006}}"#,
    )
    .unwrap();
    let r = run(&c).unwrap();
    assert!(r.pass(), "{:?}", r.rows);
    assert_eq!(r.rows.len(), 4);
    let e = cfg(ExperimentKind::DualityLattice, r#"{"params": {"x": [0.5], "y": [-0.5, 1.5], "p": 0.7, "t": 0.5}}"#)
        .unwrap();
    assert_eq!(config_path(run(&e).unwrap_err()), "params.x");
}

#[test]
fn generator_sweep_small() {
    let g = GeneratorSweep { max_m: 2, max_n: 2, window: 2.0, p: vec![0.3], functions: 5, tolerance: 1e-12 };
    assert!(generator_sweep(&g, 1).unwrap().pass);
}

#[test]
fn outputs_have_fixed_columns_and_exit_contract() {
    let dir = std::env::temp_dir().join(format!("coalsim-harness-{}", std::process::id()));
    let mut c = cfg(ExperimentKind::Sample, r#"{"replicates": 1000, "params": {"x": 1, "t": 1, "gamma": 1, "lambdas": [1]}}"#)
        .unwrap();
    c.out = Some(dir.clone());
    let r = run(&c).unwrap();
    let csv = std::fs::read_to_string(dir.join("results.csv")).unwrap();
    assert_eq!(
        csv.lines().next().unwrap(),
        "experiment,comparison,estimate_a,se_a,estimate_b,se_b,statistic,threshold,pass,seconds"
    );
    assert_eq!(csv.lines().count(), 1 + r.rows.len());
    let summary: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(dir.join("summary.json")).unwrap()).unwrap();
    assert_eq!(summary["pass"], serde_json::Value::Bool(r.pass()));
    assert_eq!(summary["experiments"][0]["seed"], 1);
    std::fs::remove_dir_all(&dir).unwrap();

    let mut bad = r.clone();
    bad.rows[0].pass = false;
    assert!(!bad.pass());
}

#[test]
fn csv_is_independent_of_worker_count() {
    let mut c = cfg(
        ExperimentKind::Moments,
        r#"{"replicates": 2000, "seed": 9, "params": {"z0": {"piecewise": {"breaks": [0, 1], "weights": [1]}},
            "m": 16, "gamma": 1, "t": 0.5, "step": 0.01, "intervals": {"ends": [0, 0.5], "weights": [1]}}}"#,
    )
    .unwrap();
    c.timing = false;
    let csv_with = |threads: usize| {
        let pool = rayon::ThreadPoolBuilder::new().num_threads(threads).build().unwrap();
        pool.install(|| csv_string(&execute(&c).unwrap().rows).unwrap())
    };
    let one = csv_with(1);
    assert_eq!(one, csv_with(4));
    assert!(one.lines().all(|l| !l.ends_with(",true,") || l.contains("moment")));
}

#[test]
fn z_score_examples() {
    use crate::stats::McEstimate;
    let e = |m: f64, s: f64| McEstimate { std_error: s, ..McEstimate::constant(m) };
    assert_eq!(z_score(&e(0.5, 0.01), &e(0.5, 0.02)), 0.0);
    assert!((z_score(&e(0.5, 0.01), &e(0.53, 0.0)) + 3.0).abs() < 1e-12);
    assert_eq!(z_score(&e(1.0, 0.0), &e(1.0, 0.0)), 0.0);
    assert_eq!(z_score(&e(1.0, 0.0), &e(0.5, 0.0)), f64::INFINITY);
}
