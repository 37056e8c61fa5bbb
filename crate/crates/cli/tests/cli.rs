use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn coalsim(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_coalsim")).args(args).output().expect("run coalsim")
}

fn scratch(name: &str) -> PathBuf {
    let d = std::env::temp_dir().join(format!("coalsim-cli-{name}-{}", std::process::id()));
    let _ = fs::remove_dir_all(&d);
    fs::create_dir_all(&d).unwrap();
    d
}

fn write(dir: &Path, name: &str, body: &str) -> String {
    let p = dir.join(name);
    fs::write(&p, body).unwrap();
    p.to_string_lossy().into_owned()
}

fn repo_config(name: &str) -> String {
    format!("{}/../../configs/{name}", env!("CARGO_MANIFEST_DIR"))
}

#[test]
fn closed_form_extinction_passes() {
    let d = scratch("cf");
    let out = d.join("out");
    let o = coalsim(&["closed-form", "--config", &repo_config("closed-form.json"), "--out", out.to_str().unwrap()]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let csv = fs::read_to_string(out.join("results.csv")).unwrap();
    let row = csv.lines().nth(1).unwrap();
    assert!(row.starts_with("closed-form,t_extinction_cdf vs expected,0.1353352832366127,"), "{row}");
    assert!(row.contains(",true,"));
    let summary = fs::read_to_string(out.join("summary.json")).unwrap();
    assert!(summary.contains("\"pass\": true"));
}

#[test]
fn failing_comparison_exits_one() {
    let d = scratch("fail");
    let cfg = write(
        &d,
        "c.json",
        r#"{"params": {"formula": {"name": "t_extinction_cdf", "zbar": 1, "gamma": 1, "t": 1}, "expected": 0.5}}"#,
    );
    let o = coalsim(&["closed-form", "--config", &cfg, "--out", d.join("out").to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
    assert!(fs::read_to_string(d.join("out/summary.json")).unwrap().contains("\"pass\": false"));
}

#[test]
fn negative_gamma_is_a_config_error() {
    let d = scratch("gamma");
    let cfg = write(&d, "c.json", r#"{"params": {"process": "feller", "x": 1, "t": 1, "gamma": -1}}"#);
    let o = coalsim(&["sample", "--config", &cfg, "--out", d.join("out").to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(err.contains("params.gamma"), "{err}");
    let o = coalsim(&["sample", "--config", &cfg, "--replicates", "1"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn output_is_byte_identical_across_worker_counts() {
    let d = scratch("det");
    let cfg = write(
        &d,
        "c.json",
        r#"{"params": {"x": [0, 2], "y": [-0.5, 1.5], "p": 0.7, "t": 0.5, "cell_tolerance": 0.02}}"#,
    );
    let mut outputs = Vec::new();
    for w in ["1", "3"] {
        let out = d.join(format!("out{w}"));
        let o = coalsim(&[
            "duality-lattice", "--config", &cfg, "--seed", "11", "--replicates", "20000", "--workers", w,
            "--no-timing", "--out", out.to_str().unwrap(),
        ]);
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stdout));
        outputs.push(fs::read(out.join("results.csv")).unwrap());
    }
    assert_eq!(outputs[0], outputs[1]);
}

#[test]
fn flow_compare_writes_grid_csv() {
    let d = scratch("flow");
    let cfg = write(
        &d,
        "c.json",
        r#"{"params": {"z0": {"piecewise": {"breaks": [0, 1], "weights": [1]}}, "gamma": 1, "t": 0.5,
            "level": 3, "lo": -0.5, "hi": 1.5, "m": 20, "intervals": {"ends": [0, 1], "weights": [1]},
            "grid_csv": true}}"#,
    );
    let out = d.join("out");
    let o = coalsim(&["flow-compare", "--config", &cfg, "--replicates", "500", "--out", out.to_str().unwrap()]);
    assert!(o.status.code().is_some_and(|c| c <= 1), "{}", String::from_utf8_lossy(&o.stderr));
    let grid = fs::read_to_string(out.join("flow_grid.csv")).unwrap();
    assert_eq!(grid.lines().next(), Some("grid_point,image,block"));
    assert!(grid.lines().count() > 2);
}

#[test]
fn acceptance_subset_runs() {
    let d = scratch("acc");
    let out = d.join("out");
    let o = coalsim(&["acceptance", "--only", "AC-3", "--out", out.to_str().unwrap()]);
    let stdout = String::from_utf8_lossy(&o.stdout);
    assert!(o.status.success(), "{stdout}");
    assert!(stdout.lines().any(|l| l.starts_with("AC-3 PASS")), "{stdout}");
    assert!(fs::read_to_string(out.join("results.csv")).unwrap().contains("AC-3,"));
}
