use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;
use tempfile::TempDir;

const LOOP_WORD: &str = "r1^-1 r2 s1 r2 r1^-1";

fn braidforge(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_braidforge"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn stdout_json(out: &Output) -> Value {
    assert!(
        out.status.success(),
        "stderr: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    serde_json::from_slice(&out.stdout).expect("JSON on stdout")
}

fn low_floor_config(dir: &Path) -> String {
    let path = dir.join("run.toml");
    std::fs::write(&path, "[verifier]\ndelta_floor = 5e-4\n").unwrap();
    path.to_str().unwrap().to_string()
}

#[test]
fn parse_reports_components_and_incidence() {
    let v = stdout_json(&braidforge(&[
        "parse",
        "--word",
        LOOP_WORD,
        "--strands",
        "3",
    ]));
    assert_eq!(v["kind"], "loop");
    assert_eq!(v["word"], "r1 r2 s1 r2 r1");
    assert_eq!(v["components"], serde_json::json!([[1], [2, 3]]));
    assert_eq!(v["pass_through_incidence"], serde_json::json!([0, 2]));

    let v = stdout_json(&braidforge(&[
        "parse",
        "--word",
        "s1 s1 s1",
        "--strands",
        "2",
    ]));
    assert_eq!(v["kind"], "classical");
    assert!(v["signed_singular"].is_null());
}

#[test]
fn parse_reads_braid_json_files() {
    let dir = TempDir::new().unwrap();
    let path = dir.path().join("w.json");
    std::fs::write(
        &path,
        r#"{"strands":2,"tokens":[{"kind":"rho","index":1,"sign":1}]}"#,
    )
    .unwrap();
    let v = stdout_json(&braidforge(&["parse", "--file", path.to_str().unwrap()]));
    assert_eq!(v["kind"], "loop");
    assert_eq!(v["strands"], 2);
}

#[test]
fn empty_classical_word_is_rejected() {
    let out = braidforge(&[
        "build",
        "--algorithm",
        "classical",
        "--word",
        "",
        "--strands",
        "2",
    ]);
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("empty word"), "{err}");
}

#[test]
fn malformed_input_fails_with_stage_tag() {
    let out = braidforge(&[
        "build",
        "--algorithm",
        "loop",
        "--word",
        "q1",
        "--strands",
        "2",
        "--lambda",
        "0.1",
    ]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("[parse]"));
}

#[test]
fn spinning_bundle_has_u_degree_two() {
    let v = stdout_json(&braidforge(&[
        "build",
        "--algorithm",
        "spin",
        "--word",
        "s1",
        "--strands",
        "2",
        "--n",
        "3",
    ]));
    assert_eq!(v["degrees"]["per_variable"]["u"]["max"], 2);
    assert_eq!(v["n"], 3);
}

#[test]
fn build_output_is_byte_identical() {
    let args = [
        "build",
        "--algorithm",
        "classical",
        "--word",
        "s1^-1 s2 s1^-1 s2 s1^-1",
        "--strands",
        "3",
    ];
    let a = braidforge(&args);
    let b = braidforge(&args);
    assert!(a.status.success());
    assert_eq!(a.stdout, b.stdout);
}

#[test]
fn emit_selects_parts() {
    let base = [
        "build",
        "--algorithm",
        "classical",
        "--word",
        "s1 s1 s1",
        "--strands",
        "2",
        "--emit",
    ];
    let bounds = stdout_json(&braidforge(&[&base[..], &["bounds"]].concat()));
    assert_eq!(bounds["kind"], "classical");
    let g = stdout_json(&braidforge(&[&base[..], &["g"]].concat()));
    assert!(g.get("vars").is_some());
    let out = braidforge(&[&base[..], &["ftilde"]].concat());
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn bounds_of_the_loop_example() {
    let v = stdout_json(&braidforge(&[
        "bounds",
        "--algorithm",
        "loop",
        "--word",
        LOOP_WORD,
        "--strands",
        "3",
    ]));
    assert_eq!(v["bound"], 52);
    let v = stdout_json(&braidforge(&[
        "bounds",
        "--algorithm",
        "satellite",
        "--word",
        LOOP_WORD,
        "--strands",
        "3",
        "--pattern",
        "trivial",
    ]));
    assert_eq!(v["kind"], "satellite");
}

#[test]
fn config_invariants_and_corrupt_bundles() {
    let dir = TempDir::new().unwrap();
    let cfg = dir.path().join("bad.toml");
    std::fs::write(&cfg, "[verifier]\ngrid = 4\n").unwrap();
    let out = braidforge(&[
        "--config",
        cfg.to_str().unwrap(),
        "parse",
        "--word",
        "s1",
        "--strands",
        "2",
    ]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("verifier.grid"));

    let bundle = dir.path().join("junk.json");
    std::fs::write(&bundle, "{not json").unwrap();
    let out = braidforge(&["verify", bundle.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("[bundle]"));
    let out = braidforge(&["verify", dir.path().join("missing.json").to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn thread_cap_from_environment() {
    let out = Command::new(env!("CARGO_BIN_EXE_braidforge"))
        .env("BRAIDFORGE_THREADS", "2")
        .args([
            "build",
            "--algorithm",
            "classical",
            "--word",
            "s1 s1 s1",
            "--strands",
            "2",
            "--emit",
            "degrees",
        ])
        .output()
        .unwrap();
    assert!(out.status.success());
    let out = Command::new(env!("CARGO_BIN_EXE_braidforge"))
        .env("BRAIDFORGE_THREADS", "0")
        .args(["parse", "--word", "s1", "--strands", "2"])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn spinning_bundle_verifies() {
    let dir = TempDir::new().unwrap();
    let bundle = dir.path().join("spin.json");
    let out = braidforge(&[
        "build",
        "--algorithm",
        "spin",
        "--word",
        "s1^-1 s2 s1^-1 s2 s1^-1",
        "--strands",
        "3",
        "--n",
        "1",
        "--out",
        bundle.to_str().unwrap(),
    ]);
    assert!(out.status.success());
    let report = stdout_json(&braidforge(&["verify", bundle.to_str().unwrap()]));
    assert_eq!(report["status"], "PASS");
    assert_eq!(report["fibration"]["expected"], 3.0);
}

/// Build, verify, rescale and export the loop example in one go so the
/// expensive build happens once.
#[test]
fn loop_example_pipeline() {
    let dir = TempDir::new().unwrap();
    let cfg = low_floor_config(dir.path());
    let bundle = dir.path().join("loop.json");
    let b = bundle.to_str().unwrap();
    let out = braidforge(&[
        "--config",
        &cfg,
        "build",
        "--algorithm",
        "loop",
        "--word",
        LOOP_WORD,
        "--strands",
        "3",
        "--out",
        b,
    ]);
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let first = std::fs::read(&bundle).unwrap();

    let out = braidforge(&["--config", &cfg, "verify", b]);
    assert_eq!(
        out.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let report: Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(report["status"], "PASS");

    let out = braidforge(&[
        "--config",
        &cfg,
        "verify",
        b,
        "--lambda",
        "10",
        "--skip",
        "grid,reextract",
    ]);
    assert_eq!(out.status.code(), Some(1));
    let report: Value = serde_json::from_slice(&out.stdout).unwrap();
    let checks = report["checks"].as_array().unwrap();
    let status_of = |name: &str| {
        checks
            .iter()
            .find(|c| c["check"] == name)
            .map(|c| c["status"].clone())
    };
    assert_eq!(status_of("containment"), Some(Value::from("FAIL")));
    assert_eq!(status_of("grid"), Some(Value::from("SKIPPED")));
    assert_eq!(status_of("reextract"), Some(Value::from("SKIPPED")));

    let plots = dir.path().join("plots");
    let out = braidforge(&[
        "plotdata",
        "--bundle",
        b,
        "--slices",
        "8",
        "--out-dir",
        plots.to_str().unwrap(),
    ]);
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let slices: Vec<_> = std::fs::read_dir(&plots)
        .unwrap()
        .map(|e| e.unwrap().file_name().into_string().unwrap())
        .filter(|n| n.starts_with("slice_"))
        .collect();
    assert_eq!(slices.len(), 8);
    for name in &slices {
        let mut rdr = csv::Reader::from_path(plots.join(name)).unwrap();
        let col = rdr
            .headers()
            .unwrap()
            .iter()
            .position(|h| h == "abs_g")
            .unwrap();
        for rec in rdr.records() {
            let g: f64 = rec.unwrap()[col].parse().unwrap();
            assert!(g < 1e-6, "{name}: |g| = {g}");
        }
    }
    let header = std::fs::read_to_string(plots.join("vectorfield.csv")).unwrap();
    assert_eq!(
        header.lines().next().unwrap(),
        "x,y,z,t,Vx,Vy,Vz,div,wave_rx,wave_ry,wave_rz"
    );

    let csv_path = dir.path().join("vf.csv");
    let out = braidforge(&[
        "vectorfield",
        "--bundle",
        b,
        "--samples",
        "200",
        "--out",
        csv_path.to_str().unwrap(),
    ]);
    assert!(out.status.success());
    let summary: Value = serde_json::from_slice(&out.stderr).unwrap();
    assert_eq!(summary["divergence_ok"], true);
    assert_eq!(
        csv::Reader::from_path(&csv_path).unwrap().records().count(),
        200
    );

    // same inputs, same bytes
    let again = dir.path().join("again.json");
    let out = braidforge(&[
        "--config",
        &cfg,
        "build",
        "--algorithm",
        "loop",
        "--word",
        LOOP_WORD,
        "--strands",
        "3",
        "--out",
        again.to_str().unwrap(),
    ]);
    assert!(out.status.success());
    assert_eq!(first, std::fs::read(&again).unwrap());
}
