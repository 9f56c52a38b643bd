use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use bergman_lab::corrector::ApproxState;
use serde_json::Value;
use sha2::{Digest, Sha256};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_bergman-lab"))
}

fn run_with(dir: &Path, config: &str, args: &[&str]) -> Output {
    let cfg = dir.join("run.cfg");
    fs::write(&cfg, config).unwrap();
    bin()
        .arg("--config")
        .arg(&cfg)
        .arg("--out")
        .arg(dir.join("out"))
        .args(args)
        .output()
        .unwrap()
}

fn manifest(dir: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(dir.join("out/manifest.json")).unwrap()).unwrap()
}

#[test]
fn density_of_fubini_study_passes() {
    let dir = tempfile::tempdir().unwrap();
    let out = run_with(dir.path(), "m = 2\nm = 8\n", &["density"]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let m = manifest(dir.path());
    assert_eq!(m["pass"], Value::Bool(true));
    assert_eq!(m["command"], "density");
    let text = fs::read_to_string(dir.path().join("out/density.csv")).unwrap();
    assert!(text.starts_with("m,x,K,C_q,K_minus_Cq\n"));
}

#[test]
fn inadmissible_potential_is_a_validation_error() {
    let dir = tempfile::tempdir().unwrap();
    let out = run_with(dir.path(), "potential = 2 0.3\nm = 16\nm = 32\n", &["density"]);
    assert_eq!(out.status.code(), Some(1));
    let m = manifest(dir.path());
    assert_eq!(m["pass"], Value::Bool(false));
    assert!(m["error"].as_str().unwrap().contains("Kähler"));
}

#[test]
fn unknown_key_reports_line() {
    let dir = tempfile::tempdir().unwrap();
    let out = run_with(dir.path(), "m = 2\nbogus = 1\n", &["density"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("line 2"));
}

#[test]
fn missing_powers_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let out = run_with(dir.path(), "", &["density"]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn fit_needs_three_powers() {
    let dir = tempfile::tempdir().unwrap();
    let out = run_with(dir.path(), "potential = 2 0.01\nm = 16\nm = 32\n", &["fit"]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn nonzero_character_exits_with_invariant_code() {
    let dir = tempfile::tempdir().unwrap();
    let out = run_with(dir.path(), "lift = 0\n", &["obstruction"]);
    assert_eq!(out.status.code(), Some(2));
    assert_eq!(manifest(dir.path())["reason"], "nonzero character");
}

#[test]
fn sl_obstruction_vanishes() {
    let dir = tempfile::tempdir().unwrap();
    let out = run_with(dir.path(), "potential = 2 0.1\n", &["obstruction"]);
    assert_eq!(out.status.code(), Some(0));
    let text = fs::read_to_string(dir.path().join("out/obstruction.csv")).unwrap();
    assert!(text.starts_with("m,lift_constant,chi,obstruction,dev_46,int_47\n"));
}

#[test]
fn manifest_hashes_match_files() {
    let dir = tempfile::tempdir().unwrap();
    let out = run_with(dir.path(), "m = 2\nm = 4\n", &["density"]);
    assert!(out.status.success());
    let files = manifest(dir.path())["files"].as_array().unwrap().clone();
    assert_eq!(files.len(), 2);
    for f in files {
        let bytes = fs::read(dir.path().join("out").join(f["name"].as_str().unwrap())).unwrap();
        assert_eq!(f["sha256"].as_str().unwrap(), format!("{:x}", Sha256::digest(&bytes)));
    }
}

#[test]
fn outputs_are_byte_identical_across_runs() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let cfg = "potential = 2 0.01\nm = 16\nm = 24\nm = 32\nm = 48\n";
    assert!(run_with(a.path(), cfg, &["fit"]).status.success());
    assert!(run_with(b.path(), cfg, &["fit"]).status.success());
    assert_eq!(
        fs::read(a.path().join("out/fit.csv")).unwrap(),
        fs::read(b.path().join("out/fit.csv")).unwrap()
    );
}

#[test]
fn corrected_state_round_trips() {
    let dir = tempfile::tempdir().unwrap();
    let out = run_with(dir.path(), "inject = 2 0.1\n", &["correct"]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let text = fs::read_to_string(dir.path().join("out/state.txt")).unwrap();
    let state = ApproxState::from_text(&text).unwrap();
    assert_eq!(state.level(), 1);
    assert_eq!(state.injected().len(), 1);
    assert!((state.corrections()[0].coeff(2) + 0.1).abs() < 1e-9);
    assert_eq!(state.to_text(), text);
}

#[test]
fn zero_steps_only_traces_the_start() {
    let dir = tempfile::tempdir().unwrap();
    let out = run_with(dir.path(), "inject = 2 0.1\nsteps = 0\n", &["correct"]);
    assert_eq!(out.status.code(), Some(0));
    let trace = fs::read_to_string(dir.path().join("out/trace.csv")).unwrap();
    assert!(trace.lines().skip(1).all(|l| l.starts_with("0,")));
}

#[test]
fn command_line_overrides_config() {
    let dir = tempfile::tempdir().unwrap();
    let out = run_with(dir.path(), "m = 2\n", &["--m", "3", "density"]);
    assert!(out.status.success());
    let text = fs::read_to_string(dir.path().join("out/density.csv")).unwrap();
    assert!(text.lines().skip(1).all(|l| l.starts_with("3,")));
}
