//! End-to-end checks of the `capax` binary: exit codes, failure
//! isolation, and the files a run leaves behind.

use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn capax(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_capax"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn write_cfg(dir: &Path, name: &str, text: &str) -> String {
    let path = dir.join(name);
    fs::write(&path, text).expect("config written");
    path.to_string_lossy().into_owned()
}

fn stdout(out: &Output) -> String {
    String::from_utf8_lossy(&out.stdout).into_owned()
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

#[test]
fn run_writes_tables_and_reports_ok() {
    let dir = tempfile::tempdir().unwrap();
    let out_dir = dir.path().join("out");
    let cfg = write_cfg(
        dir.path(),
        "run.cfg",
        "seed = 3\n\n[obstacle]\ngrid = square:4\ninstances = 2\n",
    );
    let out = capax(&["run", &cfg, "--out", out_dir.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0), "stderr: {}", stderr(&out));
    assert!(stdout(&out).contains("experiment obstacle: ok"));
    assert!(out_dir.join("obstacle.csv").is_file());
    assert!(out_dir.join("obstacle.plt").is_file());
    let manifest = fs::read_to_string(out_dir.join("manifest.txt")).unwrap();
    assert!(manifest.contains("[obstacle]"), "config echo missing");
}

#[test]
fn malformed_config_exits_two_and_writes_nothing() {
    let dir = tempfile::tempdir().unwrap();
    let out_dir = dir.path().join("out");
    let cfg = write_cfg(
        dir.path(),
        "bad.cfg",
        "seed = 3\n\n[obstacle]\nbogus = 1\n",
    );
    let out = capax(&["run", &cfg, "--out", out_dir.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    let err = stderr(&out);
    assert!(
        err.contains("config error: line 4"),
        "expected a line-4 complaint, got: {err}"
    );
    assert!(!out_dir.exists(), "a rejected config must not produce output");
}

#[test]
fn failing_experiment_does_not_block_the_rest() {
    let dir = tempfile::tempdir().unwrap();
    let out_dir = dir.path().join("out");
    let cfg = write_cfg(
        dir.path(),
        "mixed.cfg",
        "seed = 3\n\n[obstacle]\ngrid = square:4\ninstances = 2\n\n\
         [control]\nlower = constant:0\nupper = constant:-1\n",
    );
    let out = capax(&["run", &cfg, "--out", out_dir.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
    let log = stdout(&out);
    assert!(log.contains("experiment obstacle: ok"));
    assert!(log.contains("experiment control: FAILED"));
    assert!(log.contains("empty control box"));
    assert!(out_dir.join("obstacle.csv").is_file());
    assert!(!out_dir.join("control.csv").exists());
    assert!(out_dir.join("manifest.txt").is_file());
}

#[test]
fn preamble_only_config_writes_just_the_manifest() {
    let dir = tempfile::tempdir().unwrap();
    let out_dir = dir.path().join("out");
    let cfg = write_cfg(dir.path(), "empty.cfg", "seed = 9\n");
    let out = capax(&["run", &cfg, "--out", out_dir.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0), "stderr: {}", stderr(&out));
    assert!(out_dir.join("manifest.txt").is_file());
    assert_eq!(
        fs::read_dir(&out_dir).unwrap().count(),
        1,
        "nothing but the manifest expected"
    );
}

#[test]
fn verify_list_prints_the_criteria() {
    let out = capax(&["verify", "--list"]);
    assert_eq!(out.status.code(), Some(0));
    let listing = stdout(&out);
    let names: Vec<&str> = listing.lines().collect();
    assert_eq!(names.len(), 10);
    assert!(names.contains(&"oracle_equivalence"));
    assert!(names.contains(&"determinism"));
}

#[test]
fn verify_rejects_an_unknown_suite() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_cfg(dir.path(), "suite.cfg", "suite = custom\n");
    let out = capax(&["verify", &cfg]);
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains("config error: line 1"));
}
