use std::fs;
use std::process::{Command, Output};

use serde_json::Value;

fn traplab(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_traplab")).args(args).output().expect("binary runs")
}

#[test]
fn run_writes_report_and_files() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out");
    let config = dir.path().join("mtbf.json");
    fs::write(
        &config,
        format!(r#"{{"experiment": "crs.mtbf", "seed": 3, "output_dir": {:?}, "eps": 1e-9}}"#, out),
    )
    .unwrap();
    let o = traplab(&["run", config.to_str().unwrap()]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let report: Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(report["config"]["params"]["rate"], 1000.0);
    let days = report["payload"]["mtbf_days"].as_f64().unwrap();
    assert!((11.5..=11.7).contains(&days));
    assert!(out.join("crs.mtbf.json").exists());
}

#[test]
fn same_seed_gives_identical_payload() {
    let dir = tempfile::tempdir().unwrap();
    let mut payloads = Vec::new();
    for run in ["a", "b"] {
        let out = dir.path().join(run);
        let config = dir.path().join(format!("{run}.json"));
        fs::write(
            &config,
            format!(r#"{{"experiment": "scarcity.linear_sampling", "seed": 9, "output_dir": {out:?}, "n_policies": 200, "samples_per_policy": 200}}"#),
        )
        .unwrap();
        assert!(traplab(&["run", config.to_str().unwrap()]).status.success());
        payloads.push(fs::read(out.join("scarcity.linear_sampling.json")).unwrap());
    }
    assert_eq!(payloads[0], payloads[1]);
}

#[test]
fn configuration_errors_exit_with_two() {
    let dir = tempfile::tempdir().unwrap();
    let cases = [
        r#"{"experiment": "no.such.experiment"}"#,
        r#"{"experiment": "crs.mtbf", "bogus": 1}"#,
        r#"{"experiment": "crs.mtbf", "eps": "small"}"#,
        r#"{"experiment": "crs.fn_curve", "F": 1.0}"#,
        "not json",
    ];
    for (i, text) in cases.iter().enumerate() {
        let config = dir.path().join(format!("{i}.json"));
        fs::write(&config, text).unwrap();
        let o = traplab(&["run", config.to_str().unwrap()]);
        assert_eq!(o.status.code(), Some(2), "{text}");
    }
    assert_eq!(traplab(&["run", "/nonexistent/config.json"]).status.code(), Some(2));
}

#[test]
fn list_covers_catalog() {
    let o = traplab(&["list", "--json"]);
    assert!(o.status.success());
    let entries: Vec<Value> = serde_json::from_slice(&o.stdout).unwrap();
    assert!(entries.len() >= 20);
    assert!(entries.iter().any(|e| e["name"] == "verification.scaling" && e["timed"] == true));
    let text = String::from_utf8(traplab(&["list"]).stdout).unwrap();
    assert!(text.contains("crs.trap_curves"));
}

#[test]
fn unwritable_output_exits_with_two() {
    let dir = tempfile::tempdir().unwrap();
    let blocker = dir.path().join("file");
    fs::write(&blocker, "").unwrap();
    // A path below a regular file can never be created.
    let o = traplab(&["reproduce-all", "--out", blocker.join("out").to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
}
