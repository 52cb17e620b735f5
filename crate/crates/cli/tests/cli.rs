//! End-to-end tests of the `finsler` binary: exit codes, JSON/CSV output
//! contracts, and byte determinism.

use std::path::PathBuf;
use std::process::{Command, Output};

fn bin() -> PathBuf {
    PathBuf::from(env!("CARGO_BIN_EXE_finsler"))
}

fn write_spec(dir: &tempfile::TempDir, name: &str, body: &str) -> PathBuf {
    let p = dir.path().join(name);
    std::fs::write(&p, body).unwrap();
    p
}

fn run(args: &[&str]) -> Output {
    Command::new(bin())
        .args(args)
        .output()
        .unwrap_or_else(|e| panic!("failed to run finsler {:?}: {e}", args))
}

const EUCLIDEAN2: &str = r#"{"family":"euclidean","dimension":2}"#;
const SPHERE2: &str = r#"{"family":"riemannian_closed_form","dimension":2,"radius":2.0}"#;
const FUNK: &str = r#"{"family":"funk_disk","dimension":2}"#;
const PRODUCT_S2_R: &str = r#"{"family":"product","dimension":3,"factors":[{"family":"riemannian_closed_form","dimension":2,"radius":1.0},{"family":"euclidean","dimension":1}]}"#;

#[test]
fn report_euclidean_full_nullity_and_zero_curvature() {
    let dir = tempfile::tempdir().unwrap();
    let spec = write_spec(&dir, "e.json", EUCLIDEAN2);
    let out = run(&[
        "report",
        spec.to_str().unwrap(),
        "--point",
        "0,0",
        "--vector",
        "1,0",
        "--k",
        "0",
    ]);
    assert!(out.status.success(), "stderr: {}", String::from_utf8_lossy(&out.stderr));
    let doc: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(doc["schema"], "finsler-nullity/1");
    assert_eq!(doc["nullity"]["mu"], 2);
    for key in ["hh", "hv", "vv", "berwald_hh"] {
        assert_eq!(doc["curvature_norms"][key], 0.0, "{key} should vanish");
    }
}

#[test]
fn report_sphere_at_space_form_constant() {
    let dir = tempfile::tempdir().unwrap();
    let spec = write_spec(&dir, "s.json", SPHERE2);
    let out = run(&[
        "report",
        spec.to_str().unwrap(),
        "--point",
        "0.3,0.1",
        "--vector",
        "1,0.5",
        "--k",
        "0.25",
    ]);
    assert!(out.status.success());
    let doc: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert!(doc["curvature_norms"]["related_hh"].as_f64().unwrap() < 1e-7);
    assert_eq!(doc["nullity"]["mu"], 2);
    let mean = doc["flag_curvature"]["mean"].as_f64().unwrap();
    assert!((mean - 0.25).abs() < 1e-9);
}

#[test]
fn suite_passes_on_clean_metrics_and_reports_every_residual() {
    let dir = tempfile::tempdir().unwrap();
    let spec = write_spec(&dir, "p.json", PRODUCT_S2_R);
    let out = run(&[
        "suite",
        spec.to_str().unwrap(),
        "--seed",
        "3",
        "--samples",
        "6",
        "--threads",
        "2",
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stdout));
    let doc: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(doc["summary"]["failed"], 0);
    for check in doc["checks"].as_array().unwrap() {
        if check["status"] == "pass" && check["residual"].is_number() {
            assert!(check["tolerance"].is_number(), "residual rows carry tolerances");
        }
    }
}

#[test]
fn corrupted_spec_exits_2_with_machine_readable_error() {
    let dir = tempfile::tempdir().unwrap();
    let spec = write_spec(
        &dir,
        "bad.json",
        r#"{"family":"randers","dimension":2,"b":[1.0,0.5]}"#,
    );
    let out = run(&["suite", spec.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    let doc: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(doc["schema"], "finsler-nullity/1");
    assert!(doc["error"]["message"]
        .as_str()
        .unwrap()
        .contains("b norm must be < 1"));
}

#[test]
fn trace_euclidean_rows_are_exact_lines() {
    let dir = tempfile::tempdir().unwrap();
    let spec = write_spec(&dir, "e.json", EUCLIDEAN2);
    let out = run(&[
        "trace",
        spec.to_str().unwrap(),
        "--start",
        "0,0;1,0.5",
        "--t-end",
        "4",
    ]);
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next().unwrap(), "t,x1,x2,v1,v2,F");
    for line in lines {
        let cols: Vec<f64> = line.split(',').map(|c| c.parse().unwrap()).collect();
        let (t, x1, x2) = (cols[0], cols[1], cols[2]);
        assert!((x1 - t).abs() < 1e-9, "x1 = t·v1 failed at t={t}");
        assert!((x2 - 0.5 * t).abs() < 1e-9);
    }
}

#[test]
fn trace_funk_toward_boundary_ends_with_domain_exit() {
    let dir = tempfile::tempdir().unwrap();
    let spec = write_spec(&dir, "f.json", FUNK);
    let csv = dir.path().join("out.csv");
    let out = run(&[
        "trace",
        spec.to_str().unwrap(),
        "--start",
        "0,0;1,0",
        "--t-end",
        "60",
        "--csv",
        csv.to_str().unwrap(),
    ]);
    assert!(out.status.success());
    let text = std::fs::read_to_string(&csv).unwrap();
    let last = text.lines().last().unwrap();
    assert!(last.starts_with("# domain_exit t="), "got: {last}");
}

#[test]
fn trace_sphere_great_circle_closes() {
    let dir = tempfile::tempdir().unwrap();
    let spec = write_spec(
        &dir,
        "s1.json",
        r#"{"family":"riemannian_closed_form","dimension":2,"radius":1.0}"#,
    );
    let out = run(&[
        "trace",
        spec.to_str().unwrap(),
        "--start",
        "0.5,0;0,0.625",
        "--t-end",
        "6.283185307179586",
    ]);
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    let last = text.lines().last().unwrap();
    let cols: Vec<f64> = last.split(',').map(|c| c.parse().unwrap()).collect();
    assert!((cols[1] - 0.5).abs() < 1e-5 && cols[2].abs() < 1e-5, "{last}");
}

#[test]
fn suite_is_byte_deterministic_for_a_fixed_seed() {
    let dir = tempfile::tempdir().unwrap();
    let spec = write_spec(&dir, "p.json", PRODUCT_S2_R);
    let mut outs = Vec::new();
    for threads in ["1", "2"] {
        let out = run(&[
            "suite",
            spec.to_str().unwrap(),
            "--seed",
            "7",
            "--samples",
            "6",
            "--threads",
            threads,
        ]);
        assert!(out.status.success());
        let mut doc: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
        // thread count is echoed in the metadata; mask it before comparing
        doc["metadata"]["threads"] = 0.into();
        outs.push(serde_json::to_vec(&doc).unwrap());
    }
    assert_eq!(outs[0], outs[1], "output depends on the thread count");
}

#[test]
fn threads_env_fallback_is_accepted() {
    let dir = tempfile::tempdir().unwrap();
    let spec = write_spec(&dir, "e.json", EUCLIDEAN2);
    let out = Command::new(bin())
        .env("FINSLER_THREADS", "1")
        .args([
            "report",
            spec.to_str().unwrap(),
            "--point",
            "0,0",
            "--vector",
            "1,0",
        ])
        .output()
        .unwrap();
    assert!(out.status.success());
    let doc: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(doc["metadata"]["threads"], 1);
}

#[test]
fn out_of_domain_point_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    let spec = write_spec(&dir, "f.json", FUNK);
    let out = run(&[
        "report",
        spec.to_str().unwrap(),
        "--point",
        "0.9,0.9",
        "--vector",
        "1,0",
    ]);
    assert_eq!(out.status.code(), Some(2));
}
