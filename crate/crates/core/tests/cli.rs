//! The `nlilab` binary: flags, exit codes and output files.

use std::path::Path;
use std::process::{Command, Output};

use nlilab::config::parse_config;

fn nlilab(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_nlilab"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn tiny<'a>(out: &'a str, preset: &'a str) -> Vec<&'a str> {
    vec!["--preset", preset, "--spans", "1", "--channels", "2", "--symbols", "1024", "--jobs", "2", "--out", out]
}

fn path_str(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn preset_run_writes_four_files_and_records_overrides() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("run");
    let o = nlilab(&tiny(path_str(&out), "widespread-32g"));
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let mut names: Vec<String> = std::fs::read_dir(&out)
        .unwrap()
        .map(|e| e.unwrap().file_name().into_string().unwrap())
        .collect();
    names.sort();
    assert_eq!(names, ["accumulation.svg", "campaign.json", "increments.svg", "ledgers.csv"]);

    let doc: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(out.join("campaign.json")).unwrap()).unwrap();
    let m = &doc["manifest"];
    assert_eq!(m["overrides"]["spans"], 1);
    assert_eq!(m["overrides"]["channels"], 2);
    assert_eq!(m["overrides"]["symbols"], 1024);
    assert_eq!(m["preset"], "widespread-32g");
    assert_eq!(m["status"], "complete");
    assert_eq!(m["outputs"].as_array().unwrap().len(), 4);
    assert_eq!(doc["results"].as_array().unwrap().len(), 2);

    let csv = std::fs::read_to_string(out.join("ledgers.csv")).unwrap();
    let mut rows = 0;
    for line in csv.lines().skip(1) {
        let cells: Vec<&str> = line.split(',').collect();
        assert_eq!(cells.len(), 5);
        let q: f64 = cells[2].parse().unwrap();
        if q > 0.0 {
            let d: f64 = cells[3].parse().unwrap();
            assert!((d - 10.0 * q.log10()).abs() < 1e-9);
        }
        rows += 1;
    }
    // Two campaigns, one span each. A 2-channel campaign has eight ledgers:
    // total, superposition, SPM, XPM total, analytic total, and PP, XPM and
    // analytic XPM for its single pump.
    assert_eq!(rows, 2 * 8);
    for svg in ["accumulation.svg", "increments.svg"] {
        let text = std::fs::read_to_string(out.join(svg)).unwrap();
        assert!(text.starts_with("<svg") && text.contains("<!-- nlilab"));
    }
}

#[test]
fn replaying_a_manifest_reproduces_the_csv() {
    let dir = tempfile::tempdir().unwrap();
    let first = dir.path().join("first");
    let second = dir.path().join("second");
    assert!(nlilab(&tiny(path_str(&first), "highrate-64g")).status.success());
    let manifest = first.join("campaign.json");
    let o = nlilab(&["--config", path_str(&manifest), "--jobs", "1", "--out", path_str(&second)]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert_eq!(
        std::fs::read(first.join("ledgers.csv")).unwrap(),
        std::fs::read(second.join("ledgers.csv")).unwrap()
    );
    let a = parse_config(&std::fs::read_to_string(&manifest).unwrap()).unwrap();
    let b = parse_config(&std::fs::read_to_string(second.join("campaign.json")).unwrap()).unwrap();
    assert_eq!(a, b);
}

#[test]
fn configuration_errors_exit_with_code_2() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.json");
    std::fs::write(&bad, r#"{ "link": { "n_spanz": 3 } }"#).unwrap();
    let o = nlilab(&["--config", path_str(&bad), "--out", path_str(&dir.path().join("x"))]);
    assert_eq!(o.status.code(), Some(2));
    let report: serde_json::Value = serde_json::from_slice(&o.stderr).unwrap();
    assert_eq!(report["kind"], "configuration");
    assert!(report["message"].as_str().unwrap().contains("n_spanz"));
    assert!(!dir.path().join("x").exists(), "nothing is computed or written");

    std::fs::write(&bad, r#"{ "channels": { "symbol_rate_gbaud": 64, "spacing_ghz": 50 } }"#).unwrap();
    assert_eq!(nlilab(&["--config", path_str(&bad)]).status.code(), Some(2));
    assert_eq!(nlilab(&["--preset", "nope"]).status.code(), Some(2));
    assert_eq!(nlilab(&["--spans", "3"]).status.code(), Some(2));
    assert_eq!(nlilab(&["--config", "/nonexistent/config.json"]).status.code(), Some(2));
}

#[test]
fn dry_run_prints_resolved_configuration() {
    let o = nlilab(&["--preset", "highrate-64g", "--spans", "3", "--dry-run"]);
    assert!(o.status.success());
    let cfg = parse_config(&String::from_utf8(o.stdout).unwrap()).unwrap();
    assert_eq!(cfg.link.n_spans, 3);
    assert_eq!(cfg.channels.symbol_rate_gbaud, 64.0);
}

#[test]
fn strict_mode_failure_exits_with_code_3_and_leaves_a_marker() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("coarse.json");
    std::fs::write(
        &cfg,
        r#"{
            "channels": { "count": 2, "power_dbm": 12, "pump_cases": ["gaussian"] },
            "link": { "n_spans": 1, "span": { "step_policy": { "kind": "fixed", "dz_km": 40 } } },
            "n_symbols": 1024
        }"#,
    )
    .unwrap();
    let out = dir.path().join("out");
    let o = nlilab(&["--config", path_str(&cfg), "--strict", "--out", path_str(&out)]);
    assert_eq!(o.status.code(), Some(3), "{}", String::from_utf8_lossy(&o.stderr));
    let failed: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(out.join("FAILED")).unwrap()).unwrap();
    assert_eq!(failed["kind"], "numerical-accuracy");
    assert!(out.join("ledgers.csv").exists());
    assert!(out.join("campaign.json").exists());
}
