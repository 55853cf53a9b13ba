//! CLI behavior through the real binary: exit codes, artifact determinism,
//! and cross-command consistency.

use std::path::Path;
use std::process::Command;

fn gridsec() -> Command {
    Command::new(env!("CARGO_BIN_EXE_gridsec"))
}

fn fixture(name: &str) -> String {
    format!("{}/fixtures/{name}", env!("CARGO_MANIFEST_DIR"))
}

fn read(dir: &Path, name: &str) -> Vec<u8> {
    std::fs::read(dir.join(name)).unwrap_or_else(|e| panic!("{name}: {e}"))
}

#[test]
fn validate_clean_fixture_exits_zero() {
    let out = gridsec()
        .args(["validate", "--case", &fixture("case5.json")])
        .output()
        .unwrap();
    assert!(out.status.success(), "{out:?}");
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.contains("5 buses"));
}

#[test]
fn validate_broken_case_exits_one() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bad.json");
    let broken = std::fs::read_to_string(fixture("case5.json"))
        .unwrap()
        .replace("\"rating_long_s\": 160.0", "\"rating_long_s\": -1.0");
    std::fs::write(&path, broken).unwrap();
    let out = gridsec()
        .args(["validate", "--case", path.to_str().unwrap()])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(1), "{out:?}");
}

#[test]
fn design_rejects_nonpositive_budget_naming_the_flag() {
    let dir = tempfile::tempdir().unwrap();
    let out = gridsec()
        .args([
            "design",
            "--case",
            &fixture("case5.json"),
            "--kv-min",
            "0",
            "--target",
            "L1",
            "--contingency",
            "L4",
            "--n1",
            "0",
            "--ls",
            "0.05",
            "--out",
            dir.path().to_str().unwrap(),
        ])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2), "{out:?}");
    let err = String::from_utf8(out.stderr).unwrap();
    assert!(err.contains("--n1"), "message names the flag: {err}");
}

#[test]
fn rtca_on_unloaded_case_writes_empty_warning_csv() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("unloaded.json");
    let unloaded = std::fs::read_to_string(fixture("case2.json"))
        .unwrap()
        .replace("\"load_p\": 100.0", "\"load_p\": 0.0")
        .replace("\"p0\": 100.0", "\"p0\": 0.0");
    std::fs::write(&path, unloaded).unwrap();
    let out_dir = dir.path().join("out");
    let out = gridsec()
        .args([
            "rtca",
            "--case",
            path.to_str().unwrap(),
            "--kv-min",
            "0",
            "--out",
            out_dir.to_str().unwrap(),
        ])
        .output()
        .unwrap();
    assert!(out.status.success(), "{out:?}");
    let csv = String::from_utf8(read(&out_dir, "screen.csv")).unwrap();
    assert!(!csv.contains("warning"));
    assert!(!csv.contains("violation"));
}

#[test]
fn identical_runs_produce_byte_identical_artifacts() {
    let dir = tempfile::tempdir().unwrap();
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    for out_dir in [&a, &b] {
        let out = gridsec()
            .args([
                "simulate",
                "--case",
                &fixture("case5.json"),
                "--kv-min",
                "0",
                "--target",
                "L1",
                "--contingency",
                "L4",
                "--n1",
                "0.2",
                "--ls",
                "0.05",
                "--out",
                out_dir.to_str().unwrap(),
            ])
            .output()
            .unwrap();
        assert!(out.status.success(), "{out:?}");
    }
    for name in ["report.json", "trace.jsonl", "pairs.csv"] {
        assert_eq!(
            read(&a, name),
            read(&b, name),
            "artifact {name} must be deterministic"
        );
    }
}

#[test]
fn screen_cells_agree_with_individual_simulate_runs() {
    let dir = tempfile::tempdir().unwrap();
    let screen_dir = dir.path().join("screen");
    let out = gridsec()
        .args([
            "screen",
            "--case",
            &fixture("case5.json"),
            "--kv-min",
            "0",
            "--n1",
            "0.2,2.0",
            "--ls",
            "0.1",
            "--out",
            screen_dir.to_str().unwrap(),
        ])
        .output()
        .unwrap();
    assert!(out.status.success(), "{out:?}");
    let cells = String::from_utf8(read(&screen_dir, "cells.csv")).unwrap();
    let mut reader = csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .from_reader(cells.as_bytes());
    let headers = reader.headers().unwrap().clone();
    let phys_col = headers.iter().position(|h| h == "physical_pct").unwrap();
    let n1_col = headers.iter().position(|h| h == "n1").unwrap();
    let mut checked = 0;
    for record in reader.records() {
        let record = record.unwrap();
        let n1 = &record[n1_col];
        let phys: f64 = record[phys_col].parse().unwrap();
        let sim_dir = dir.path().join(format!("sim{n1}"));
        let out = gridsec()
            .args([
                "simulate",
                "--case",
                &fixture("case5.json"),
                "--kv-min",
                "0",
                "--target",
                "L1",
                "--contingency",
                "L4",
                "--n1",
                n1,
                "--ls",
                "0.1",
                "--out",
                sim_dir.to_str().unwrap(),
            ])
            .output()
            .unwrap();
        assert!(out.status.success(), "{out:?}");
        let report: serde_json::Value =
            serde_json::from_slice(&read(&sim_dir, "report.json")).unwrap();
        let direct = report["report"]["physical_pct"].as_f64().unwrap();
        assert!(
            (phys - direct).abs() < 5e-3,
            "n1={n1}: sweep {phys} vs simulate {direct}"
        );
        checked += 1;
    }
    assert_eq!(checked, 2);
}

#[test]
fn artifacts_embed_resolved_config() {
    let dir = tempfile::tempdir().unwrap();
    let out_dir = dir.path().join("out");
    let out = gridsec()
        .args([
            "rtca",
            "--case",
            &fixture("case5.json"),
            "--kv-min",
            "0",
            "--tau",
            "0.85",
            "--out",
            out_dir.to_str().unwrap(),
        ])
        .output()
        .unwrap();
    assert!(out.status.success());
    let csv = String::from_utf8(read(&out_dir, "screen.csv")).unwrap();
    let first = csv.lines().next().unwrap();
    assert!(first.starts_with("# config "));
    assert!(first.contains("\"tau\":0.85"));
    let constraints: serde_json::Value =
        serde_json::from_slice(&read(&out_dir, "constraints.json")).unwrap();
    assert_eq!(constraints["config"]["tau"].as_f64(), Some(0.85));
}

#[test]
fn parallel_screen_is_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    for (out_dir, jobs) in [(&a, "1"), (&b, "3")] {
        let out = gridsec()
            .args([
                "screen",
                "--case",
                &fixture("case5.json"),
                "--kv-min",
                "0",
                "--n1",
                "0.2,1.0",
                "--ls",
                "0.05",
                "--jobs",
                jobs,
                "--out",
                out_dir.to_str().unwrap(),
            ])
            .output()
            .unwrap();
        assert!(out.status.success(), "{out:?}");
    }
    // the worker count must not leak into the artifacts except through the
    // embedded config line, so compare the data body
    for name in ["table.csv", "cells.csv", "plotdata.csv"] {
        let strip = |raw: Vec<u8>| {
            let text = String::from_utf8(raw).unwrap();
            text.lines()
                .filter(|l| !l.starts_with('#'))
                .collect::<Vec<_>>()
                .join("\n")
        };
        assert_eq!(
            strip(read(&a, name)),
            strip(read(&b, name)),
            "artifact {name} must not depend on --jobs"
        );
    }
}
