//! End-to-end tests against the built binary: exit codes, output schemas,
//! and byte-level determinism.

use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn nue_lab(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_nue-lab"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn stdout_json(out: &Output) -> Value {
    serde_json::from_slice(&out.stdout).expect("stdout is JSON")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exit code")
}

#[test]
fn verify_cf4_all_checks_pass() {
    let out = nue_lab(&["verify", "--family", "cf4", "--kmax", "6"]);
    assert_eq!(code(&out), 0);
    let doc = stdout_json(&out);
    assert_eq!(doc["command"], "verify");
    assert_eq!(doc["config"]["family"], "cf4");
    assert_eq!(doc["config"]["kmax"], "6");
    let checks = doc["checks"].as_array().unwrap();
    assert_eq!(checks.len(), 5);
    assert!(checks.iter().all(|c| c["pass"] == Value::Bool(true)));
    assert_eq!(doc["dio"]["undecided"], 0);
    assert_eq!(doc["dio"]["all_pass"], true);
}

#[test]
fn verify_explicit_ones_notes_divergence_and_passes() {
    let out = nue_lab(&[
        "verify", "--family", "explicit", "--digits", "1,1,1", "--kmax", "2",
    ]);
    assert_eq!(code(&out), 0);
    let doc = stdout_json(&out);
    assert_eq!(doc["conditions"]["a_diverging_trend"], true);
    let cond = doc["checks"]
        .as_array()
        .unwrap()
        .iter()
        .find(|c| c["name"] == "growth-conditions")
        .unwrap();
    assert!(cond["detail"]
        .as_str()
        .unwrap()
        .contains("diverging trend"));
}

#[test]
fn scan_c0_ratios_exactly_one() {
    let dir = tempfile::tempdir().unwrap();
    let out = nue_lab(&[
        "scan",
        "--family",
        "cf4",
        "--c",
        "0",
        "--out",
        dir.path().to_str().unwrap(),
    ]);
    assert_eq!(code(&out), 0);
    let doc = stdout_json(&out);
    assert_eq!(doc["verdict"]["kind"], "barycenter");
    assert_eq!(doc["flagged"], 0);
    let csv = std::fs::read_to_string(dir.path().join("scan.csv")).unwrap();
    let mut rows = 0;
    for line in csv.lines().skip(1) {
        let ratio = line.split(',').nth(3).unwrap();
        assert_eq!(ratio, "1", "non-exact ratio in: {line}");
        rows += 1;
    }
    assert_eq!(rows, doc["points"].as_u64().unwrap() as usize);
    assert!(dir.path().join("scan_lengths.csv").exists());
    assert!(dir.path().join("scan_verdict.json").exists());
}

#[test]
fn scan_cf4_classifies_plus_endpoint() {
    let dir = tempfile::tempdir().unwrap();
    let out = nue_lab(&[
        "scan",
        "--family",
        "cf4",
        "--c",
        "1",
        "--out",
        dir.path().to_str().unwrap(),
    ]);
    assert_eq!(code(&out), 0);
    let doc = stdout_json(&out);
    assert_eq!(doc["verdict"]["kind"], "ergodic_plus");
    assert!(doc["verdict"]["c_min"].as_f64().unwrap() > 0.95);
}

#[test]
fn scan_cf3_two_regime_straddles() {
    let dir = tempfile::tempdir().unwrap();
    let out = nue_lab(&[
        "scan",
        "--family",
        "cf3",
        "--c",
        "1",
        "--schedule",
        "both",
        "--out",
        dir.path().to_str().unwrap(),
    ]);
    assert_eq!(code(&out), 0);
    let doc = stdout_json(&out);
    assert_eq!(doc["verdict"]["kind"], "interval");
    assert!(doc["verdict"]["c_min"].as_f64().unwrap() < 0.2);
    assert!(doc["verdict"]["c_max"].as_f64().unwrap() > 0.5);
}

#[test]
fn scan_reruns_are_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().to_str().unwrap().to_string();
    let args = [
        "scan", "--family", "cf4", "--c", "0.5", "--kmax", "8", "--tail-fraction", "1",
        "--out", &path,
    ];
    let first = nue_lab(&args.iter().map(|s| &**s).collect::<Vec<_>>());
    assert_eq!(code(&first), 0);
    let csv1 = std::fs::read(dir.path().join("scan.csv")).unwrap();
    let len1 = std::fs::read(dir.path().join("scan_lengths.csv")).unwrap();
    let second = nue_lab(&args.iter().map(|s| &**s).collect::<Vec<_>>());
    assert_eq!(first.stdout, second.stdout);
    assert_eq!(csv1, std::fs::read(dir.path().join("scan.csv")).unwrap());
    assert_eq!(len1, std::fs::read(dir.path().join("scan_lengths.csv")).unwrap());
}

#[test]
fn orbit_zero_length_writes_empty_csv() {
    let dir = tempfile::tempdir().unwrap();
    let out = nue_lab(&[
        "orbit",
        "--family",
        "cf4",
        "--n",
        "0",
        "--out",
        dir.path().to_str().unwrap(),
    ]);
    assert_eq!(code(&out), 0);
    let csv = std::fs::read_to_string(dir.path().join("orbit.csv")).unwrap();
    assert_eq!(csv.lines().count(), 1, "header only");
}

#[test]
fn orbit_traces_sheet_paired_grid() {
    let dir = tempfile::tempdir().unwrap();
    let out = nue_lab(&[
        "orbit",
        "--family",
        "cf4",
        "--stage",
        "6",
        "--n",
        "10000",
        "--seeds",
        "grid:2",
        "--out",
        dir.path().to_str().unwrap(),
    ]);
    assert_eq!(code(&out), 0);
    let doc = stdout_json(&out);
    let seeds = doc["seeds"].as_array().unwrap();
    assert_eq!(seeds.len(), 4, "grid:2 is sheet-paired");
    for s in seeds {
        let f = s["final_fraction"].as_f64().unwrap();
        assert!((0.0..=1.0).contains(&f));
    }
    let csv = std::fs::read_to_string(dir.path().join("orbit.csv")).unwrap();
    assert!(csv.lines().count() > 4);
    assert!(csv.starts_with("seed_index,seed,n,x_mid,x_radius,sheet,running_fraction"));
}

#[test]
fn orbit_duplicate_seeds_deduped_with_warning() {
    let dir = tempfile::tempdir().unwrap();
    let out = nue_lab(&[
        "orbit", "--family", "cf4", "--stage", "6", "--n", "100", "--seeds",
        "list:1/3,1/3,2/7", "--out", dir.path().to_str().unwrap(),
    ]);
    assert_eq!(code(&out), 0);
    let stderr = String::from_utf8_lossy(&out.stderr);
    assert!(stderr.contains("duplicate seed 1/3@0 ignored"));
    let doc = stdout_json(&out);
    assert_eq!(doc["seeds"].as_array().unwrap().len(), 2);
}

#[test]
fn orbit_past_integer_width_is_inconclusive() {
    let dir = tempfile::tempdir().unwrap();
    let out = nue_lab(&[
        "orbit",
        "--family",
        "cf4",
        "--stage",
        "14",
        "--n",
        "100",
        "--out",
        dir.path().to_str().unwrap(),
    ]);
    assert_eq!(code(&out), 3);
    let csv = std::fs::read_to_string(dir.path().join("orbit.csv")).unwrap();
    assert_eq!(csv.lines().count(), 1, "partial output: header only");
    let doc = stdout_json(&out);
    assert!(doc["note"].as_str().unwrap().contains("bits"));
}

#[test]
fn malformed_invocations_exit_64() {
    assert_eq!(code(&nue_lab(&["scan", "--nope"])), 64);
    assert_eq!(code(&nue_lab(&["frobnicate"])), 64);
    assert_eq!(code(&nue_lab(&["scan", "--family", "cf9"])), 64);
    assert_eq!(code(&nue_lab(&["scan", "--family", "cf4", "--c", "7"])), 64);
    assert_eq!(code(&nue_lab(&["scan", "--family", "cf4", "--schedule", "both"])), 64);
    assert_eq!(
        code(&nue_lab(&["orbit", "--family", "cf4", "--seeds", "list:3/2"])),
        64
    );
}

#[test]
fn help_and_version_exit_zero() {
    assert_eq!(code(&nue_lab(&["--help"])), 0);
    assert_eq!(code(&nue_lab(&["--version"])), 0);
    assert_eq!(code(&nue_lab(&["scan", "--help"])), 0);
}

#[test]
fn config_file_parsed_and_flags_win() {
    let dir = tempfile::tempdir().unwrap();
    let conf = dir.path().join("run.conf");
    std::fs::write(&conf, "# run\nfamily = cf4\nc = 0   # exact symmetry\nkmax = 13\n").unwrap();
    let out = nue_lab(&[
        "scan",
        "--config",
        conf.to_str().unwrap(),
        "--kmax",
        "12",
        "--out",
        dir.path().to_str().unwrap(),
    ]);
    assert_eq!(code(&out), 0);
    let doc = stdout_json(&out);
    assert_eq!(doc["config"]["kmax"], "12");
    assert_eq!(doc["config"]["c"], "0");
    assert_eq!(doc["verdict"]["kind"], "barycenter");
}

#[test]
fn config_file_unknown_key_exits_64() {
    let dir = tempfile::tempdir().unwrap();
    let conf = dir.path().join("bad.conf");
    std::fs::write(&conf, "famly = cf4\n").unwrap();
    let out = nue_lab(&["verify", "--config", conf.to_str().unwrap()]);
    assert_eq!(code(&out), 64);
    assert!(String::from_utf8_lossy(&out.stderr).contains("famly"));
}

#[test]
fn report_bundles_all_sections() {
    let out = nue_lab(&["report", "--family", "cf4"]);
    assert_eq!(code(&out), 0);
    let doc = stdout_json(&out);
    assert_eq!(doc["command"], "report");
    assert!(doc["verify"]["checks"].as_array().unwrap().len() == 5);
    assert_eq!(doc["scan"]["verdict"]["kind"], "ergodic_plus");
    let dom = doc["dominance"].as_array().unwrap();
    assert!(!dom.is_empty());
    assert!(dom.iter().all(|d| d["pass"] == Value::Bool(true)));
    assert_eq!(doc["oscillation"]["complete"], true);
    assert!(doc["schedule"].as_array().unwrap().len() >= 3);
}
