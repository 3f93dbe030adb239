//! The `delayline` binary: artifacts, exit codes and reproducibility.

use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use delayline::config::{RunConfig, KEYS};

fn delayline(args: &[&str], dir: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_delayline"))
        .args(args)
        .current_dir(dir)
        .output()
        .expect("binary runs")
}

fn write_config(dir: &Path, name: &str, text: &str) -> String {
    let path = dir.join(name);
    fs::write(&path, text).unwrap();
    path.to_string_lossy().into_owned()
}

const KERNEL: &str = "# small kernel run\nexperiment = kernel\nn_values = 3, 23\noutput = out/kern\n";

#[test]
fn kernel_run_writes_three_artifacts() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "k.cfg", KERNEL);
    let out = delayline(&["run", &cfg], dir.path());
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));

    let csv = fs::read_to_string(dir.path().join("out/kern_series.csv")).unwrap();
    let mut lines = csv.lines();
    assert_eq!(lines.next(), Some("time,name,value"));
    let names: std::collections::BTreeSet<&str> = lines.map(|l| l.split(',').nth(1).unwrap()).collect();
    assert_eq!(names.into_iter().collect::<Vec<_>>(), ["kernel_abs_n23", "kernel_abs_n3"]);

    let meta = fs::read_to_string(dir.path().join("out/kern_meta.txt")).unwrap();
    for key in ["experiment=kernel", "derived.gamma_n23=22", "git_describe=", "wall_time_s=", "status=PASS"] {
        assert!(meta.contains(key), "missing {key} in\n{meta}");
    }
    let report = fs::read_to_string(dir.path().join("out/kern_report.txt")).unwrap();
    assert!(report.lines().any(|l| l.starts_with("PASS mass_n3")));
    assert!(report.trim_end().ends_with("overall PASS"));
}

#[test]
fn manifest_recovers_the_config() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "k.cfg", KERNEL);
    assert_eq!(delayline(&["run", &cfg], dir.path()).status.code(), Some(0));
    let meta = fs::read_to_string(dir.path().join("out/kern_meta.txt")).unwrap();
    let params: String = meta
        .lines()
        .filter(|l| l.split_once('=').is_some_and(|(k, _)| KEYS.contains(&k)))
        .map(|l| format!("{l}\n"))
        .collect();
    let original: RunConfig = KERNEL.parse().unwrap();
    assert_eq!(params.parse::<RunConfig>().unwrap(), original);
}

#[test]
fn reruns_are_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        "q.cfg",
        "experiment = qubit\nn = 3\nt_max = 0.5\nsample_every = 25\noutput = q\n",
    );
    let read = || {
        delayline(&["run", &cfg], dir.path());
        fs::read(dir.path().join("q_series.csv")).unwrap()
    };
    let first = read();
    assert!(!first.is_empty());
    assert_eq!(first, read());
}

#[test]
fn unknown_key_is_a_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "bad.cfg", "experiment = kernel\nkapa = 1\n");
    for cmd in ["validate", "run"] {
        let out = delayline(&[cmd, &cfg], dir.path());
        assert_eq!(out.status.code(), Some(2));
        assert!(String::from_utf8_lossy(&out.stderr).contains("unknown key `kapa`"));
    }
    let missing = delayline(&["validate", "nowhere.cfg"], dir.path());
    assert_eq!(missing.status.code(), Some(2));
}

#[test]
fn missed_threshold_exits_three() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "t.cfg", "experiment = kernel\nn_values = 3\ntolerance = 1e-18\n");
    let out = delayline(&["run", &cfg], dir.path());
    assert_eq!(out.status.code(), Some(3));
    let report = fs::read_to_string(dir.path().join("kernel_report.txt")).unwrap();
    assert!(report.contains("FAIL mass_n3"));
}

#[test]
fn bond_cap_exceeded_exits_four() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "b.cfg", "experiment = qubit\nn = 3\nt_max = 0.1\nmax_bond = 1\n");
    let out = delayline(&["run", &cfg], dir.path());
    assert_eq!(out.status.code(), Some(4), "{}", String::from_utf8_lossy(&out.stderr));
}

#[test]
fn validate_and_list() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "k.cfg", KERNEL);
    let out = delayline(&["validate", &cfg], dir.path());
    assert_eq!(out.status.code(), Some(0));
    let list = String::from_utf8(delayline(&["list-experiments"], dir.path()).stdout).unwrap();
    for name in ["kernel", "linear", "profile", "qubit", "oracle-compare", "trotter-order"] {
        assert!(list.lines().any(|l| l.starts_with(name)), "{name}");
    }
}
