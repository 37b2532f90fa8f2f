use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use tempfile::TempDir;

fn data(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("data").join(name)
}

fn cli(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_cavity-noise"))
        .env_remove("CAVITY_NOISE_OUT")
        .args(args)
        .output()
        .unwrap()
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

const SCENARIO: &str = r#"
schema_version = 1
config = "baseline.toml"
budgets = ["p073", "p220"]

[grid]
f_min_hz = 100.0
f_max_hz = 1.0e6
points_per_decade = 200

[readout]
loop_unity_gain_hz = 1.0e3

[[attribution]]
operating_point = "p220"
band_hz = [21000.0, 22000.0]
"#;

/// Temp dir holding the baseline config and a scenario with the given text.
fn workspace(scenario: &str) -> (TempDir, PathBuf) {
    let dir = TempDir::new().unwrap();
    fs::copy(data("baseline.toml"), dir.path().join("baseline.toml")).unwrap();
    let path = dir.path().join("scenario.toml");
    fs::write(&path, scenario).unwrap();
    (dir, path)
}

fn run_to(scenario: &Path, out: &Path) -> Output {
    cli(&["run", scenario.to_str().unwrap(), "--out", out.to_str().unwrap()])
}

fn files(dir: &Path) -> Vec<PathBuf> {
    let mut all = Vec::new();
    for entry in fs::read_dir(dir).unwrap() {
        let p = entry.unwrap().path();
        if p.is_dir() {
            all.extend(files(&p));
        } else {
            all.push(p);
        }
    }
    all.sort();
    all
}

#[test]
fn repeated_runs_are_byte_identical() {
    let (dir, scenario) = workspace(SCENARIO);
    let a = dir.path().join("a");
    let b = dir.path().join("b");
    assert!(run_to(&scenario, &a).status.success());
    assert!(run_to(&scenario, &b).status.success());
    let fa = files(&a);
    let fb = files(&b);
    assert_eq!(fa.len(), fb.len());
    assert!(fa.iter().any(|p| p.ends_with("p220/total.csv")));
    assert!(fa.iter().any(|p| p.ends_with("p073/budget.json")));
    for (x, y) in fa.iter().zip(&fb) {
        assert_eq!(x.strip_prefix(&a).unwrap(), y.strip_prefix(&b).unwrap());
        assert_eq!(fs::read(x).unwrap(), fs::read(y).unwrap(), "{}", x.display());
    }
}

#[test]
fn grid_flag_overrides_scenario_grid() {
    let (dir, scenario) = workspace(SCENARIO);
    let out = dir.path().join("o");
    let status = cli(&[
        "run",
        scenario.to_str().unwrap(),
        "--grid",
        "1000:100000:200",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert!(status.status.success(), "{}", stderr(&status));
    let csv = fs::read_to_string(out.join("p220/total.csv")).unwrap();
    assert_eq!(csv.lines().count(), 1 + 401);
}

#[test]
fn env_var_sets_output_dir() {
    let (dir, scenario) = workspace(SCENARIO);
    let out = dir.path().join("from_env");
    let status = Command::new(env!("CARGO_BIN_EXE_cavity-noise"))
        .env("CAVITY_NOISE_OUT", &out)
        .args(["run", scenario.to_str().unwrap()])
        .output()
        .unwrap();
    assert!(status.status.success(), "{}", stderr(&status));
    assert!(out.join("summary.json").is_file());
}

#[test]
fn band_outside_grid_fails_and_leaves_nothing() {
    let bad = SCENARIO.replace("[21000.0, 22000.0]", "[50.0, 200.0]");
    let (dir, scenario) = workspace(&bad);
    let out = dir.path().join("o");
    let status = run_to(&scenario, &out);
    assert!(!status.status.success());
    let msg = stderr(&status);
    assert!(msg.contains("50") && msg.contains("200"), "{msg}");
    assert!(!out.join("summary.json").exists());
    assert!(!out.join("p220").exists());
}

#[test]
fn missing_operating_point_is_reported() {
    let bad = SCENARIO.replace("\"p073\"", "\"p999\"");
    let (dir, scenario) = workspace(&bad);
    let status = run_to(&scenario, &dir.path().join("o"));
    assert!(!status.status.success());
    assert!(stderr(&status).contains("p999"));
}

#[test]
fn import_check_accepts_outputs_and_rejects_negative_rows() {
    let (dir, scenario) = workspace(SCENARIO);
    let out = dir.path().join("o");
    assert!(run_to(&scenario, &out).status.success());
    for f in ["p220/total.csv", "p220/budget.json"] {
        let s = cli(&["import-check", out.join(f).to_str().unwrap()]);
        assert!(s.status.success(), "{}", stderr(&s));
    }

    let bad = dir.path().join("bad.csv");
    fs::write(
        &bad,
        "frequency_hz,asd_m_per_sqrthz,label\n100,1e-15,x\n200,-1e-15,x\n300,1e-15,x\n",
    )
    .unwrap();
    let s = cli(&["import-check", bad.to_str().unwrap()]);
    assert!(!s.status.success());
    let msg = stderr(&s);
    assert!(msg.contains("bad.csv:3:") && msg.contains("-1e-15"), "{msg}");
}

#[test]
fn compare_with_itself_gives_unity() {
    let (dir, scenario) = workspace(SCENARIO);
    let out = dir.path().join("o");
    assert!(run_to(&scenario, &out).status.success());
    let model = out.join("p220/budget.json");
    let s = cli(&[
        "compare",
        model.to_str().unwrap(),
        out.join("p220/total.csv").to_str().unwrap(),
        "--bands",
        "1000:2000,21000:22000",
    ]);
    assert!(s.status.success(), "{}", stderr(&s));
    let v: serde_json::Value = serde_json::from_slice(&s.stdout).unwrap();
    let bands = v["bands"].as_array().unwrap();
    assert_eq!(bands.len(), 2);
    for b in bands {
        assert!((b["ratio"].as_f64().unwrap() - 1.0).abs() < 1e-12);
    }
}

#[test]
fn compare_counterfactual_exceeds_unity() {
    let (dir, scenario) = workspace(SCENARIO);
    let out = dir.path().join("o");
    assert!(run_to(&scenario, &out).status.success());
    let report = dir.path().join("report.json");
    let s = cli(&[
        "compare",
        out.join("p220/total_without_qrpn.csv").to_str().unwrap(),
        out.join("p220/total.csv").to_str().unwrap(),
        "--bands",
        "21000:22000",
    ]);
    // a CSV is not a model budget
    assert!(!s.status.success());

    let s = cli(&[
        "compare",
        out.join("p220/budget.json").to_str().unwrap(),
        out.join("p220/total_without_qrpn.csv").to_str().unwrap(),
        "--bands",
        "21000:22000",
        "--report",
        report.to_str().unwrap(),
    ]);
    assert!(s.status.success(), "{}", stderr(&s));
    let v: serde_json::Value = serde_json::from_str(&fs::read_to_string(&report).unwrap()).unwrap();
    let ratio = v["bands"][0]["ratio"].as_f64().unwrap();
    assert!(ratio < 1.0 / 1.3, "{ratio}");
}

#[test]
fn compare_with_no_bands_is_empty() {
    let (dir, scenario) = workspace(SCENARIO);
    let out = dir.path().join("o");
    assert!(run_to(&scenario, &out).status.success());
    let s = cli(&[
        "compare",
        out.join("p220/budget.json").to_str().unwrap(),
        out.join("p220/total.csv").to_str().unwrap(),
    ]);
    assert!(s.status.success(), "{}", stderr(&s));
    let v: serde_json::Value = serde_json::from_slice(&s.stdout).unwrap();
    assert_eq!(v["bands"].as_array().unwrap().len(), 0);
}

#[test]
fn compare_band_outside_measured_range_fails() {
    let (dir, scenario) = workspace(SCENARIO);
    let out = dir.path().join("o");
    assert!(run_to(&scenario, &out).status.success());
    let s = cli(&[
        "compare",
        out.join("p220/budget.json").to_str().unwrap(),
        out.join("p220/total.csv").to_str().unwrap(),
        "--bands",
        "10:50",
    ]);
    assert!(!s.status.success());
}
