use std::fs;
use std::process::{Command, Output};

use localizer_core::operator::{GradedOperator, OperatorMetadata};
use serde_json::Value;

fn lab(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_localizer-lab"))
        .args(args)
        .env_remove("LOCALIZER_LAB_THREADS")
        .output()
        .unwrap()
}

fn json(out: &Output) -> Value {
    serde_json::from_slice(&out.stdout).unwrap_or_else(|e| {
        panic!(
            "{e}\nstdout: {}\nstderr: {}",
            String::from_utf8_lossy(&out.stdout),
            String::from_utf8_lossy(&out.stderr)
        )
    })
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

#[test]
fn oscillator_compute_agrees_with_oracles() {
    let out = lab(&["compute", "--model", "oscillator:n=60", "--auto"]);
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    let report = json(&out);
    assert_eq!(report["localizer_index"], 1);
    assert_eq!(report["oracles"]["graded_kernel"]["value"], 1);
    assert_eq!(report["values"]["sharp_formula"], 1);
    assert_eq!(report["certificate"]["passed"], true);
    assert_eq!(report["agreement"], true);
}

#[test]
fn chern_model_without_admissible_pair_is_a_usage_error() {
    let out = lab(&["compute", "--model", "qwz:L=14,m=3.0", "--auto"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(
        stderr(&out).contains("truncation too small"),
        "{}",
        stderr(&out)
    );
}

#[test]
fn uncertified_chern_run_reports_the_disagreeing_oracle() {
    let out = lab(&[
        "compute",
        "--model",
        "qwz:L=12,m=1",
        "--kappa",
        "0.5",
        "--rho",
        "2.5",
        "--uncertified",
    ]);
    assert_eq!(out.status.code(), Some(3));
    let report = json(&out);
    assert_eq!(report["mode"], "uncertified");
    assert_eq!(report["values"]["localizer"], 1);
    assert_eq!(report["values"]["chern_bz"], 1);
    assert_eq!(report["certificate"]["admissible"], false);
    assert!(stderr(&out).contains("index disagreement"));
}

#[test]
fn trivial_chern_phase_is_consistent_when_uncertified() {
    let out = lab(&[
        "compute",
        "--model",
        "qwz:L=12,m=3",
        "--kappa",
        "0.5",
        "--rho",
        "2.5",
        "--uncertified",
    ]);
    // All integers agree at 0; only the certificate is missing.
    assert_eq!(out.status.code(), Some(1), "{}", stderr(&out));
    let report = json(&out);
    assert_eq!(report["agreement"], true);
    assert_eq!(report["passed"], false);
}

#[test]
fn usage_errors_exit_two() {
    let missing = lab(&["compute", "--auto"]);
    assert_eq!(missing.status.code(), Some(2));
    assert!(stderr(&missing).contains("--model"));
    let both = lab(&[
        "compute",
        "--model",
        "oscillator:n=10",
        "--auto",
        "--kappa",
        "1",
    ]);
    assert_eq!(both.status.code(), Some(2));
    let neither = lab(&["compute", "--model", "oscillator:n=10"]);
    assert_eq!(neither.status.code(), Some(2));
    let bad_model = lab(&["compute", "--model", "torus:L=3", "--auto"]);
    assert_eq!(bad_model.status.code(), Some(2));
    let bad_flag = lab(&["compute", "--frobnicate"]);
    assert_eq!(bad_flag.status.code(), Some(2));
    let bad_tolerance = lab(&[
        "compute",
        "--model",
        "oscillator:n=10",
        "--auto",
        "--tau-sig",
        "-1",
    ]);
    assert_eq!(bad_tolerance.status.code(), Some(2));
    let too_wide = lab(&[
        "compute",
        "--model",
        "oscillator:n=10",
        "--kappa",
        "1",
        "--rho",
        "50",
    ]);
    assert_eq!(too_wide.status.code(), Some(2));
    assert!(stderr(&too_wide).contains("truncation limit"));
}

#[test]
fn config_file_keys_yield_to_flags() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("run.json");
    fs::write(
        &path,
        r#"{"model": "oscillator:n=40", "kappa": 1.0, "rho": 50.0}"#,
    )
    .unwrap();
    let cfg = path.to_str().unwrap();
    // rho = 50 exceeds the truncation; the flag replaces it.
    assert_eq!(lab(&["compute", "--config", cfg]).status.code(), Some(2));
    let out = lab(&["compute", "--config", cfg, "--rho", "2.0"]);
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    assert_eq!(json(&out)["localizer"]["rho"], 2.0);

    fs::write(
        &path,
        r#"{"model": "oscillator:n=40", "auto": true, "colour": 1}"#,
    )
    .unwrap();
    let out = lab(&["compute", "--config", cfg]);
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains("unknown field"));
}

#[test]
fn reports_are_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a.json");
    let b = dir.path().join("b.json");
    for path in [&a, &b] {
        let out = lab(&[
            "compute",
            "--model",
            "oscillator:n=30,strength=0.002,seed=1",
            "--auto",
            "--out",
            path.to_str().unwrap(),
        ]);
        assert!(out.stdout.is_empty());
        assert!(matches!(out.status.code(), Some(0 | 3)), "{}", stderr(&out));
    }
    assert_eq!(fs::read(&a).unwrap(), fs::read(&b).unwrap());
}

#[test]
fn single_cell_sweep() {
    let out = lab(&[
        "sweep",
        "--model",
        "oscillator:n=40",
        "--kappas",
        "1",
        "--rhos",
        "2",
        "--format",
        "csv",
    ]);
    assert_eq!(out.status.code(), Some(0));
    let text = String::from_utf8(out.stdout).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines.len(), 3);
    assert!(lines[1].starts_with("1,2,0,true,true,"));
    assert!(lines[2].contains("constant = true"));
}

#[test]
fn oscillator_sweep_is_constant() {
    let out = lab(&[
        "sweep",
        "--model",
        "oscillator:n=60",
        "--kappas",
        "0.5,1",
        "--rhos",
        "2,4,8",
    ]);
    assert_eq!(out.status.code(), Some(0));
    let report = json(&out);
    let rows = report["rows"].as_array().unwrap();
    assert_eq!(rows.len(), 6);
    for row in rows
        .iter()
        .filter(|r| r["admissible"] == true && r["resolved"] == true)
    {
        assert_eq!(row["class"], 1);
    }
    assert_eq!(report["summary"]["classes"], serde_json::json!([1]));
}

#[test]
fn inadmissible_sweep_warns_without_failing() {
    let out = lab(&[
        "sweep",
        "--model",
        "oscillator:n=30,strength=0.002",
        "--kappas",
        "0.01",
        "--rhos",
        "0.1",
        "--format",
        "json",
    ]);
    assert_eq!(out.status.code(), Some(0));
    assert_eq!(json(&out)["summary"]["admissible_cells"], 0);
    assert!(stderr(&out).contains("warning"));
}

#[test]
fn empty_grid_is_rejected() {
    let out = lab(&["sweep", "--model", "oscillator:n=10", "--rhos", "1"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn verify_suites_pass() {
    for suite in ["bounds", "identities", "homotopy"] {
        let out = lab(&["verify", suite, "--seed", "42"]);
        let text = String::from_utf8_lossy(&out.stdout);
        assert_eq!(out.status.code(), Some(0), "{suite}: {text}");
        assert!(text.contains("[PASS]"));
        assert!(!text.contains("[FAIL]"));
    }
    assert_eq!(lab(&["verify", "everything"]).status.code(), Some(2));
}

#[test]
fn verify_writes_structured_report() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("checks.json");
    let out = lab(&["verify", "homotopy", "--out", path.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0));
    let report: Value = serde_json::from_str(&fs::read_to_string(&path).unwrap()).unwrap();
    assert_eq!(report["failed"], 0);
    assert_eq!(report["checks"].as_array().unwrap().len(), 2);
}

#[test]
fn relative_class_compute() {
    let out = lab(&["compute", "--model", "mk:k=3,n=2,rank=4,seed=1"]);
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    let report = json(&out);
    assert_eq!(report["values"]["half_signature"], 4);
    assert_eq!(report["values"]["rank"], 4);
}

#[test]
fn exported_model_reads_back() {
    let dir = tempfile::tempdir().unwrap();
    let out = lab(&[
        "export-model",
        "--model",
        "oscillator:n=6",
        "--out",
        dir.path().to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    let manifest: Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("model.json")).unwrap()).unwrap();
    let meta: OperatorMetadata =
        serde_json::from_value(manifest["files"]["D.csv"].clone()).unwrap();
    let d =
        GradedOperator::read_csv(fs::File::open(dir.path().join("D.csv")).unwrap(), &meta).unwrap();
    assert_eq!(d.block_minus_plus()[[1, 2]].re, 2f64.sqrt());
    assert_eq!(
        lab(&["export-model", "--model", "oscillator:n=6"])
            .status
            .code(),
        Some(2)
    );
}

#[test]
fn exported_phi_table() {
    let out = lab(&["export-phi", "--step", "0.25"]);
    assert_eq!(out.status.code(), Some(0));
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.starts_with("x,phi(x)\n-1,0\n"));
    assert!(text.contains("\n0,1\n"));
    let out = lab(&["export-phi", "--format", "json"]);
    assert_eq!(json(&out)["validation"]["passed"], true);
}

#[test]
fn thread_cap_is_validated() {
    let out = Command::new(env!("CARGO_BIN_EXE_localizer-lab"))
        .args(["verify", "homotopy"])
        .env("LOCALIZER_LAB_THREADS", "0")
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
    let out = Command::new(env!("CARGO_BIN_EXE_localizer-lab"))
        .args(["verify", "homotopy"])
        .env("LOCALIZER_LAB_THREADS", "1")
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0));
}
